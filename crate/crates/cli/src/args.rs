//! Value parsers for SNR and grid flags.

use std::str::FromStr;

use roy_core::roc::db_to_linear;

/// Linear SNR, parsed from `5dB` (decibels) or `3.162` (linear).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snr(pub f64);

impl FromStr for Snr {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let lower = s.to_ascii_lowercase();
        let value = if let Some(db) = lower.strip_suffix("db") {
            let db: f64 = db
                .trim()
                .parse()
                .map_err(|_| format!("'{s}' is not a decibel value such as 5dB"))?;
            db_to_linear(db)
        } else {
            s.parse()
                .map_err(|_| format!("'{s}' is neither linear (3.162) nor decibels (5dB)"))?
        };
        if !(value >= 0.0) || !value.is_finite() {
            return Err(format!("SNR must be finite and nonnegative, got '{s}'"));
        }
        Ok(Snr(value))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

/// `start:stop:count:linear|log`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    pub spacing: Spacing,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|k| {
                let f = k as f64 / last;
                match self.spacing {
                    Spacing::Linear => self.start + f * (self.stop - self.start),
                    Spacing::Log => (self.start.ln() + f * (self.stop / self.start).ln()).exp(),
                }
            })
            .enumerate()
            .map(|(k, v)| match k {
                0 => self.start,
                k if k + 1 == self.count => self.stop,
                _ => v,
            })
            .collect()
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 4 {
            return Err(format!(
                "'{s}' is not of the form start:stop:count:linear|log"
            ));
        }
        let number = |p: &str, what: &str| -> Result<f64, String> {
            p.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("grid {what} '{p}' is not a finite number"))
        };
        let start = number(parts[0], "start")?;
        let stop = number(parts[1], "stop")?;
        let count: usize = parts[2]
            .parse()
            .map_err(|_| format!("grid count '{}' is not a positive integer", parts[2]))?;
        let spacing = match parts[3] {
            "linear" | "lin" => Spacing::Linear,
            "log" => Spacing::Log,
            other => return Err(format!("grid spacing '{other}' must be linear or log")),
        };
        if count < 2 {
            return Err(format!("grid count must be at least 2, got {count}"));
        }
        if stop <= start {
            return Err(format!("grid stop {stop} must exceed start {start}"));
        }
        if spacing == Spacing::Log && start <= 0.0 {
            return Err(format!("log grid needs a positive start, got {start}"));
        }
        Ok(Grid {
            start,
            stop,
            count,
            spacing,
        })
    }
}
