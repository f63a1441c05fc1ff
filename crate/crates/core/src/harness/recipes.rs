//! Bundled experiment configurations.

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;

const T1: &str = include_str!("../../configs/t1.json");
const T2: &str = include_str!("../../configs/t2.json");
const FIG1: &str = include_str!("../../configs/fig1.json");
const FIG3_L30: &str = include_str!("../../configs/fig3_l30.json");
const FIG3_L50: &str = include_str!("../../configs/fig3_l50.json");
const FIG3_L100: &str = include_str!("../../configs/fig3_l100.json");
const FIG4: &str = include_str!("../../configs/fig4.json");
const FIG6: &str = include_str!("../../configs/fig6.json");

pub const RECIPES: [&str; 6] = ["t1", "t2", "fig1", "fig3", "fig4", "fig6"];

/// Configurations behind a recipe name. `full` switches to the long
/// protocol where the bundled one is shortened (more runs).
pub fn recipe(name: &str, full: bool) -> Result<Vec<ExperimentConfig>> {
    let sources: &[&str] = match name {
        "t1" => &[T1],
        "t2" => &[T2],
        "fig1" => &[FIG1],
        "fig3" => &[FIG3_L30, FIG3_L50, FIG3_L100],
        "fig4" => &[FIG4],
        "fig6" => &[FIG6],
        other => {
            return Err(Error::ValidationError {
                field: "table".into(),
                message: format!("unknown recipe {other:?}; expected one of {}", RECIPES.join(", ")),
            })
        }
    };
    let full_runs = match name {
        "fig1" | "fig6" => Some(200),
        "fig3" => Some(100),
        _ => None,
    };
    sources
        .iter()
        .map(|s| {
            let mut cfg = ExperimentConfig::from_json(s)?;
            if let (true, Some(n)) = (full, full_runs) {
                cfg.n_runs = n;
            }
            Ok(cfg)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_recipes_load() {
        for name in RECIPES {
            let configs = recipe(name, false).unwrap();
            assert!(!configs.is_empty());
        }
        assert_eq!(recipe("fig6", true).unwrap()[0].n_runs, 200);
        assert!(recipe("t9", false).is_err());
    }
}
