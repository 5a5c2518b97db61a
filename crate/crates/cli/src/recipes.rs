//! Shipped experiment configs reproducing the figures of the study.

use anyhow::{Context, Result};

use crate::config::ExperimentConfig;

macro_rules! recipes {
    ($($name:literal),* $(,)?) => {
        /// `(name, json)` of every shipped recipe.
        pub const RECIPES: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../recipes/", $name, ".json")))),*
        ];
    };
}

recipes!(
    "fig1_center",
    "fig1_right",
    "fig2_panel1",
    "fig2_panel2",
    "fig2_panel3",
    "fig2_panel4",
    "fig3_rho01",
    "fig3_rho05",
    "fig4_positive_transfer",
    "fig5_reweigh",
    "fig6_coupled",
    "figF1",
    "figF2",
    "figF3",
    "eta_reweigh",
    "eta_coupled",
);

pub fn names() -> impl Iterator<Item = &'static str> {
    RECIPES.iter().map(|(n, _)| *n)
}

pub fn source(name: &str) -> Option<&'static str> {
    RECIPES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn load(name: &str) -> Result<ExperimentConfig> {
    let text = source(name).with_context(|| format!("no recipe named `{name}`"))?;
    ExperimentConfig::from_json(text).with_context(|| format!("recipe `{name}`"))
}
