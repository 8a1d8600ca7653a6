//! Flat `key = value` settings: built-in defaults, then a config file, then
//! command-line flags.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use gprelay_core::Cell;

use crate::CliError;

pub const RUN_DEFAULTS: &[(&str, &str)] = &[
    ("map", ""),
    ("gen_map", ""),
    ("frameworks", "beta-sgp"),
    ("beta", "10"),
    ("budget", "2,1"),
    ("seed", "0"),
    ("n_sim", "1"),
    ("sensor_horizon", "70"),
    ("sensor_start", "random"),
    ("actor_start", "12,33"),
    ("goal", "43,25"),
    ("max_steps", "auto"),
    ("sigma_tilde", "auto"),
    ("actor_window", "5"),
    ("actor_noise", "0.01"),
    ("sensor_window", "7"),
    ("sensor_noise", "0.05"),
    ("sigma_th", "0.14"),
    ("y0", "0.5"),
    ("epsilon", "0.501"),
    ("a", "0.1"),
    ("gamma", "0.05"),
    ("max_waypoints", "16"),
    ("mc_samples", "16"),
    ("selection_epochs", "100"),
    ("selection_lr", "0.3"),
    ("selection_joint_hyperparams", "false"),
    ("actor_fit_lr", "0.05"),
    ("sensor_fit_lr", "0.02"),
    ("max_fit_points", "128"),
    ("deadlock_visits", "3"),
    ("freeze_len", "8"),
    ("images", "true"),
    ("out", "out"),
];

pub const ABLATION_DEFAULTS: &[(&str, &str)] = &[
    ("map", ""),
    ("gen_map", ""),
    ("betas", "1,10,50,100"),
    ("budgets", "30,60,300,600"),
    ("seed", "0"),
    ("goal", "auto"),
    ("sigma_tilde", "auto"),
    ("noise", "0.05"),
    ("y0", "0.5"),
    ("fit_epochs", "200"),
    ("fit_lr", "0.02"),
    ("max_fit_points", "256"),
    ("mc_samples", "16"),
    ("selection_epochs", "300"),
    ("selection_lr", "0.3"),
    ("images", "true"),
    ("out", "out"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    entries: Vec<(String, String)>,
}

fn usage(msg: impl Display) -> CliError {
    CliError::Usage(msg.to_string())
}

impl Settings {
    pub fn new(defaults: &[(&str, &str)]) -> Self {
        Self { entries: defaults.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect() }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some((_, v)) => {
                *v = value.trim().to_string();
                Ok(())
            }
            None => Err(usage(format!("unknown setting {key:?}"))),
        }
    }

    /// Applies `key = value` lines; blank lines and `#` comments are skipped.
    pub fn merge_text(&mut self, text: &str) -> Result<(), CliError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("config line {}: expected `key = value`, got {line:?}", n + 1)))?;
            self.set(k.trim(), v).map_err(|e| usage(format!("config line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        self.merge_text(&text)
    }

    /// Every key with its effective value, one `key = value` per line.
    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn raw(&self, key: &str) -> &str {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .unwrap_or_else(|| panic!("setting {key} has no default"))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        let raw = self.raw(key);
        raw.parse().map_err(|e| usage(format!("invalid value {raw:?} for {key}: {e}")))
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, CliError>
    where
        T::Err: Display,
    {
        let raw = self.raw(key);
        if raw.is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|s| s.trim().parse().map_err(|e| usage(format!("invalid entry {s:?} in {key}: {e}"))))
            .collect()
    }

    /// `None` for `auto`.
    pub fn auto<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        if self.raw(key) == "auto" {
            Ok(None)
        } else {
            self.get(key).map(Some)
        }
    }

    pub fn cell(&self, key: &str) -> Result<Cell, CliError> {
        let v: Vec<usize> = self.list(key)?;
        match v[..] {
            [x, y] => Ok(Cell::new(x, y)),
            _ => Err(usage(format!("{key} must be `x,y`, got {:?}", self.raw(key)))),
        }
    }

    pub fn auto_cell(&self, key: &str) -> Result<Option<Cell>, CliError> {
        if self.raw(key) == "auto" || self.raw(key) == "random" {
            Ok(None)
        } else {
            self.cell(key).map(Some)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layering_and_render_round_trip() {
        let mut s = Settings::new(RUN_DEFAULTS);
        s.merge_text("# comment\nseed = 7\n\nbudget=3,1\n").unwrap();
        s.set("seed", "9").unwrap();
        assert_eq!(s.get::<u64>("seed").unwrap(), 9);
        assert_eq!(s.list::<usize>("budget").unwrap(), vec![3, 1]);
        let mut again = Settings::new(RUN_DEFAULTS);
        again.merge_text(&s.render()).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn bad_input_is_a_usage_error() {
        let mut s = Settings::new(RUN_DEFAULTS);
        assert!(matches!(s.set("nope", "1"), Err(CliError::Usage(_))));
        assert!(matches!(s.merge_text("seed 7"), Err(CliError::Usage(_))));
        s.set("seed", "x").unwrap();
        assert!(s.get::<u64>("seed").is_err());
        assert_eq!(s.auto::<f64>("sigma_tilde").unwrap(), None);
        assert_eq!(s.cell("goal").unwrap(), Cell::new(43, 25));
        assert_eq!(s.auto_cell("sensor_start").unwrap(), None);
    }
}
