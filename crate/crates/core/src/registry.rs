//! Published worked instances, verbatim.
//!
//! All use `V = S = {0, 1/3, 2/3, 1}` and `t = 0.5`. Priors and score rows are
//! stored exactly as printed and renormalized on construction.

use std::collections::BTreeMap;

use crate::model::{validate_instance, Instance, Mechanism};

pub const EXAMPLE1: &str = "example1";
pub const THM6_TMM_VS_SOM: &str = "thm6_tmm_vs_som";
pub const THM6_OM1_VS_TMM: &str = "thm6_om1_vs_tmm";
pub const THM7_RANKING: &str = "thm7_ranking";
pub const THM9_OMK_VS_UM: &str = "thm9_omk_vs_um";
pub const THM9_UM_VS_KXOM1: &str = "thm9_um_vs_kxom1";

const BAR: f64 = 0.5;

pub fn quarter_grid() -> Vec<f64> {
    vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]
}

fn build(prior: [f64; 4], rows: [[f64; 4]; 4]) -> Instance {
    let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
    validate_instance(&quarter_grid(), &quarter_grid(), &prior, &rows, BAR)
        .expect("registered instances are valid")
}

const THM6_PRIOR: [f64; 4] = [0.262, 0.535, 0.191, 0.012];
const THM9_PRIOR: [f64; 4] = [0.2645, 0.5386, 0.1861, 0.0109];

pub fn example1() -> Instance {
    build(
        [0.264, 0.539, 0.186, 0.012],
        [
            [0.762, 0.122, 0.072, 0.044],
            [0.009, 0.792, 0.136, 0.063],
            [0.038, 0.127, 0.825, 0.010],
            [0.031, 0.052, 0.171, 0.746],
        ],
    )
}

pub fn thm6_tmm_vs_som() -> Instance {
    build(
        THM6_PRIOR,
        [
            [0.754, 0.133, 0.077, 0.036],
            [0.013, 0.701, 0.261, 0.025],
            [0.008, 0.173, 0.814, 0.005],
            [0.017, 0.030, 0.037, 0.916],
        ],
    )
}

pub fn thm6_om1_vs_tmm() -> Instance {
    build(
        THM6_PRIOR,
        [
            [0.71, 0.13, 0.11, 0.05],
            [0.03, 0.82, 0.09, 0.06],
            [0.11, 0.13, 0.72, 0.04],
            [0.01, 0.08, 0.15, 0.76],
        ],
    )
}

pub fn thm7_ranking() -> Instance {
    build(
        THM6_PRIOR,
        [
            [0.84, 0.12, 0.02, 0.02],
            [0.14, 0.80, 0.05, 0.01],
            [0.07, 0.18, 0.72, 0.03],
            [0.06, 0.08, 0.14, 0.72],
        ],
    )
}

/// Two-item instance (`k = 2`).
pub fn thm9_omk_vs_um() -> Instance {
    build(
        THM9_PRIOR,
        [
            [0.522, 0.232, 0.145, 0.101],
            [0.022, 0.708, 0.221, 0.049],
            [0.004, 0.427, 0.515, 0.054],
            [0.066, 0.113, 0.270, 0.551],
        ],
    )
}

/// Two-item instance (`k = 2`).
pub fn thm9_um_vs_kxom1() -> Instance {
    build(
        THM9_PRIOR,
        [
            [0.749, 0.128, 0.074, 0.049],
            [0.057, 0.737, 0.190, 0.016],
            [0.018, 0.086, 0.834, 0.062],
            [0.144, 0.147, 0.209, 0.500],
        ],
    )
}

/// The five instances named by the reproduction suite.
pub fn paper_registry() -> BTreeMap<&'static str, Instance> {
    BTreeMap::from([
        (EXAMPLE1, example1()),
        (THM6_TMM_VS_SOM, thm6_tmm_vs_som()),
        (THM6_OM1_VS_TMM, thm6_om1_vs_tmm()),
        (THM9_OMK_VS_UM, thm9_omk_vs_um()),
        (THM9_UM_VS_KXOM1, thm9_um_vs_kxom1()),
    ])
}

/// [`paper_registry`] plus the ranking-mechanism counterexample.
pub fn all_instances() -> BTreeMap<&'static str, Instance> {
    let mut map = paper_registry();
    map.insert(THM7_RANKING, thm7_ranking());
    map
}

/// Item count each registered instance is studied with.
pub fn item_count(name: &str) -> usize {
    match name {
        THM7_RANKING | THM9_OMK_VS_UM | THM9_UM_VS_KXOM1 => 2,
        _ => 1,
    }
}

fn printed(rows: [[f64; 4]; 4], label: &str) -> Mechanism {
    let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
    Mechanism::from_rows(&rows, label).expect("printed matrices are in [0, 1]")
}

/// The LP-optimal acquiring matrix printed with Example 1.
pub fn example1_printed_x() -> Mechanism {
    printed(
        [
            [0.044, 0.044, 0.044, 0.044],
            [0.0, 0.0, 0.37931, 0.37931],
            [0.0, 0.0, 0.37931, 0.37931],
            [0.0, 0.0, 0.0, 1.0],
        ],
        "example1 printed X",
    )
}

/// The two-menu matrix printed for [`thm6_tmm_vs_som`].
pub fn thm6_printed_tmm() -> Mechanism {
    printed(
        [
            [0.0, 0.0, 0.0, 1.0],
            [0.0, 0.0, 0.08741, 0.08741],
            [0.0, 0.0, 0.08741, 0.08741],
            [0.0, 0.0, 0.0, 1.0],
        ],
        "printed X_TMM",
    )
}

/// The LP-optimal matrix printed for [`thm6_om1_vs_tmm`].
pub fn thm6_printed_om1() -> Mechanism {
    printed(
        [
            [0.0, 0.0, 0.4, 0.4],
            [0.06, 0.06, 0.06, 0.06],
            [0.0, 0.0, 0.4, 0.4],
            [0.0, 0.0, 0.0, 1.0],
        ],
        "printed X_OM1",
    )
}

/// Printed aggregates `x_rank(v1, v2)` for [`thm7_ranking`]: greater, equal,
/// smaller; rows index `v1`, columns `v2`.
pub fn thm7_printed_aggregates() -> [[[f64; 4]; 4]; 3] {
    [
        [
            [0.1724, 0.8510, 0.8320, 0.2372],
            [0.1758, 0.8195, 0.3372, 0.1562],
            [0.7820, 0.9550, 0.8670, 0.7840],
            [0.8924, 1.0110, 1.4468, 0.9804],
        ],
        [
            [0.0032, 0.0048, 0.0600, 0.0688],
            [0.0048, 0.0072, 0.0900, 0.1032],
            [0.0600, 0.0900, 1.1250, 1.2900],
            [0.0688, 0.1032, 1.2900, 1.4792],
        ],
        [
            [0.1724, 0.1758, 0.7820, 0.8924],
            [0.8510, 0.8195, 0.9550, 1.0110],
            [0.8320, 0.3372, 0.8670, 1.4468],
            [0.2372, 0.1562, 0.7840, 0.9804],
        ],
    ]
}
