//! Shipped reproduction configs for the five figures.

use crate::config::{ConfigError, ExperimentConfig};

pub const FIGURES: [u8; 5] = [1, 2, 3, 4, 5];

pub fn figure_source(figure: u8) -> Option<&'static str> {
    match figure {
        1 => Some(include_str!("../configs/fig1.toml")),
        2 => Some(include_str!("../configs/fig2.toml")),
        3 => Some(include_str!("../configs/fig3.toml")),
        4 => Some(include_str!("../configs/fig4.toml")),
        5 => Some(include_str!("../configs/fig5.toml")),
        _ => None,
    }
}

pub fn figure_config(figure: u8) -> Result<ExperimentConfig, ConfigError> {
    let source = figure_source(figure).ok_or_else(|| ConfigError::Field {
        field: "figure".into(),
        message: format!("no figure {figure}; expected 1..=5"),
    })?;
    ExperimentConfig::from_toml_str(source)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_figure_configs_parse() {
        for k in FIGURES {
            let c = figure_config(k).unwrap();
            assert_eq!(c.seed, k as u64);
        }
        assert!(figure_config(6).is_err());
    }
}
