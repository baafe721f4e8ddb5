//! Feature screening and redundancy pruning for the component models.
//!
//! Screening keeps features whose absolute Pearson correlation with the
//! target component clears a threshold; pruning then fits a small boosted
//! ensemble on the survivors and drops the candidates whose permutation
//! importance falls outside the kept fraction. Both stages are deterministic
//! given the seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gbt::{self, FeatureRow, GbtConfig};
use crate::series::{FeatureMatrix, MonthlySeries};
use crate::{derive_seed, Error, Result};

/// Which decomposition component a selection was made for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Trend,
    Random,
}

impl std::fmt::Display for Component {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Component::Trend => write!(f, "trend"),
            Component::Random => write!(f, "random"),
        }
    }
}

/// One scored candidate feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub name: String,
    pub pcc: f64,
    pub importance: f64,
}

/// Outcome of screening plus pruning for one component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSelection {
    pub component: Component,
    /// Candidates ordered by permutation importance, descending.
    pub ranked: Vec<RankedFeature>,
    /// Surviving feature names, in ranked order; never empty.
    pub selected: Vec<String>,
}

impl FeatureSelection {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("selection serializes")
    }
}

/// Pearson correlation coefficient of two equal-length samples.
pub fn pcc(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::config("pcc needs equal lengths of at least 2"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::degenerate("constant input has no correlation"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Features whose `|pcc|` with the target clears the threshold, sorted by
/// `|pcc|` descending (ties keep column order). Constant columns carry no
/// correlation signal and are skipped.
pub fn screen_by_pcc(
    features: &FeatureMatrix,
    target: &MonthlySeries,
    threshold: f64,
) -> Result<Vec<(String, f64)>> {
    if features.start() != target.start() || features.row_count() != target.len() {
        return Err(Error::alignment(
            "features and target must cover the same months",
        ));
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::config("pcc threshold must lie in [0,1]"));
    }
    let mut scored: Vec<(usize, String, f64)> = Vec::new();
    for (idx, name) in features.names().iter().enumerate() {
        match pcc(features.column_by_index(idx), target.values()) {
            Ok(r) => scored.push((idx, name.clone(), r)),
            Err(Error::DegenerateInput { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    scored.sort_by(|a, b| b.2.abs().total_cmp(&a.2.abs()).then(a.0.cmp(&b.0)));
    Ok(scored
        .into_iter()
        .filter(|(_, _, r)| r.abs() >= threshold)
        .map(|(_, name, r)| (name, r))
        .collect())
}

// Small fixed learner for permutation scoring.
fn importance_model_config() -> GbtConfig {
    GbtConfig {
        n_estimators: 50,
        max_depth: 2,
        learning_rate: 0.1,
        lambda: 1.0,
        gamma: 0.0,
        min_child_weight: 1.0,
    }
}

const PERMUTATION_REPEATS: usize = 10;

/// Permutation-importance pruning of a candidate set.
///
/// Fits a small boosted model on the candidates, then scores each candidate
/// by the mean increase in training MSE over ten seeded shuffles of its
/// column. The top `ceil(keep_fraction * candidates)` by importance survive;
/// at least one always does. Each candidate shuffles with its own RNG stream
/// derived from `(seed, candidate index)`.
pub fn prune_by_importance(
    features: &FeatureMatrix,
    target: &MonthlySeries,
    candidates: &[String],
    keep_fraction: f64,
    seed: u64,
    component: Component,
) -> Result<FeatureSelection> {
    if candidates.is_empty() {
        return Err(Error::config("no candidate features to prune"));
    }
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::config("keep_fraction must lie in (0, 1]"));
    }
    let candidate_matrix = features.select(candidates)?;
    let fit = gbt::fit_gbt(&candidate_matrix, target, &importance_model_config(), seed)?;
    let y = target.values();
    let n = y.len();

    let mse = |preds: &[f64]| -> f64 {
        preds
            .iter()
            .zip(y)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / n as f64
    };
    let baseline = mse(&fit.train_predictions);

    let mut rows: Vec<FeatureRow> = (0..n)
        .map(|i| {
            candidates
                .iter()
                .map(|c| (c.clone(), candidate_matrix.column(c).expect("candidate")[i]))
                .collect()
        })
        .collect();

    let mut importances: Vec<(usize, f64)> = Vec::with_capacity(candidates.len());
    for (j, name) in candidates.iter().enumerate() {
        let original = candidate_matrix.column(name).expect("candidate").to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("perm-{j}")));
        let mut total = 0.0;
        for _ in 0..PERMUTATION_REPEATS {
            let mut shuffled = original.clone();
            rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
            for (row, v) in rows.iter_mut().zip(&shuffled) {
                row.insert(name.clone(), *v);
            }
            let preds: Vec<f64> = rows
                .iter()
                .map(|r| gbt::predict_gbt(&fit.model, r))
                .collect::<Result<_>>()?;
            total += mse(&preds) - baseline;
        }
        for (row, v) in rows.iter_mut().zip(&original) {
            row.insert(name.clone(), *v);
        }
        importances.push((j, total / PERMUTATION_REPEATS as f64));
    }

    importances.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let keep =
        ((keep_fraction * candidates.len() as f64).ceil() as usize).clamp(1, candidates.len());

    let ranked: Vec<RankedFeature> = importances
        .iter()
        .map(|&(j, importance)| RankedFeature {
            name: candidates[j].clone(),
            pcc: pcc(
                candidate_matrix.column(&candidates[j]).expect("candidate"),
                y,
            )
            .unwrap_or(0.0),
            importance,
        })
        .collect();
    let selected = ranked.iter().take(keep).map(|r| r.name.clone()).collect();

    Ok(FeatureSelection {
        component,
        ranked,
        selected,
    })
}

/// Selection pinned by configuration: the listed features are taken as-is in
/// list order, with their correlations recorded and importance left at zero
/// (not evaluated).
pub fn preset_selection(
    features: &FeatureMatrix,
    target: &MonthlySeries,
    component: Component,
    names: &[String],
) -> Result<FeatureSelection> {
    if names.is_empty() {
        return Err(Error::config(
            "a feature preset must name at least one column",
        ));
    }
    let mut ranked = Vec::with_capacity(names.len());
    for name in names {
        let column = features
            .column(name)
            .ok_or_else(|| Error::MissingFeature { name: name.clone() })?;
        ranked.push(RankedFeature {
            name: name.clone(),
            pcc: pcc(column, target.values()).unwrap_or(0.0),
            importance: 0.0,
        });
    }
    Ok(FeatureSelection {
        component,
        ranked,
        selected: names.to_vec(),
    })
}

/// Screening followed by pruning for one component; if nothing clears the
/// screening threshold the single best `|pcc|` feature is used instead.
pub fn select_component_features(
    features: &FeatureMatrix,
    target: &MonthlySeries,
    component: Component,
    pcc_threshold: f64,
    keep_fraction: f64,
    seed: u64,
) -> Result<FeatureSelection> {
    let mut screened = screen_by_pcc(features, target, pcc_threshold)?;
    if screened.is_empty() {
        screened = screen_by_pcc(features, target, 0.0)?
            .into_iter()
            .take(1)
            .collect();
        if screened.is_empty() {
            return Err(Error::degenerate(
                "no feature has a defined correlation with the target",
            ));
        }
    }
    let candidates: Vec<String> = screened.into_iter().map(|(n, _)| n).collect();
    prune_by_importance(
        features,
        target,
        &candidates,
        keep_fraction,
        seed,
        component,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::YearMonth;
    use rand::Rng;

    fn ym() -> YearMonth {
        YearMonth::new(2013, 1).unwrap()
    }

    fn matrix(names: &[&str], cols: Vec<Vec<f64>>) -> FeatureMatrix {
        FeatureMatrix::new(ym(), names.iter().map(|s| s.to_string()).collect(), cols).unwrap()
    }

    fn target(values: Vec<f64>) -> MonthlySeries {
        MonthlySeries::new(ym(), values).unwrap()
    }

    /// Direct transcription of the correlation formula, kept independent of
    /// the library implementation.
    fn pcc_oracle(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let num: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let dx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum::<f64>().sqrt();
        let dy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum::<f64>().sqrt();
        num / (dx * dy)
    }

    #[test]
    fn pcc_perfect_relations() {
        assert!((pcc(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pcc(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pcc_hand_computed_value() {
        // covariance sum 4.0, denominators sqrt(5)*sqrt(5)
        let r = pcc(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.8).abs() < 1e-12);
    }

    #[test]
    fn pcc_rejects_constant_input() {
        assert!(matches!(
            pcc(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::DegenerateInput { .. })
        ));
        assert!(pcc(&[1.0], &[1.0]).is_err());
        assert!(pcc(&[1.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn screen_ranks_identical_feature_first() {
        let t: Vec<f64> = (0..30)
            .map(|i| (i as f64 * 0.9).sin() * 3.0 + i as f64)
            .collect();
        let anti: Vec<f64> = t.iter().map(|v| -v).collect();
        let weak: Vec<f64> = (0..30).map(|i| (i * 17 % 13) as f64).collect();
        let m = matrix(&["same", "anti", "weak"], vec![t.clone(), anti, weak]);
        let out = screen_by_pcc(&m, &target(t), 0.3).unwrap();
        assert_eq!(out[0].0, "same");
        assert!((out[0].1 - 1.0).abs() < 1e-12);
        // negated copy passes the absolute-value screen with pcc -1
        assert_eq!(out[1].0, "anti");
        assert!((out[1].1 + 1.0).abs() < 1e-12);
    }

    #[test]
    fn screen_with_calibrated_correlations() {
        let mut rng = ChaCha8Rng::seed_from_u64(4242);
        let n = 400;
        let t: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        // noise drawn from the same distribution as the target, so the
        // population correlation of the mix is exactly rho
        let noisy = |rho: f64, rng: &mut ChaCha8Rng| -> Vec<f64> {
            let s = (1.0 - rho * rho).sqrt();
            t.iter()
                .map(|v| rho * v + s * rng.random_range(-1.0..1.0))
                .collect()
        };
        let strong = noisy(0.9, &mut rng);
        let medium = noisy(0.5, &mut rng);
        let faint = noisy(0.1, &mut rng);

        // the realized sample correlations must land in the intended buckets
        let (rs, rm, rf) = (
            pcc_oracle(&strong, &t),
            pcc_oracle(&medium, &t),
            pcc_oracle(&faint, &t),
        );
        assert!(rs > 0.8, "strong realized {rs}");
        assert!((0.35..0.65).contains(&rm), "medium realized {rm}");
        assert!(rf.abs() < 0.3, "faint realized {rf}");

        let m = matrix(&["strong", "medium", "faint"], vec![strong, medium, faint]);
        let out = screen_by_pcc(&m, &target(t.clone()), 0.3).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].0, "strong");
        assert_eq!(out[1].0, "medium");
        for (name, r) in &out {
            let col = m.column(name).unwrap();
            assert!((r - pcc_oracle(col, &t)).abs() < 1e-12);
        }
    }

    #[test]
    fn screen_skips_constant_columns() {
        let t: Vec<f64> = (0..24).map(|i| i as f64).collect();
        let m = matrix(&["const", "good"], vec![vec![7.0; 24], t.clone()]);
        let out = screen_by_pcc(&m, &target(t), 0.3).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].0, "good");
    }

    #[test]
    fn prune_single_candidate_always_survives() {
        let t: Vec<f64> = (0..24).map(|i| i as f64).collect();
        let m = matrix(&["only"], vec![t.clone()]);
        let sel = prune_by_importance(&m, &target(t), &["only".into()], 0.5, 1, Component::Trend)
            .unwrap();
        assert_eq!(sel.selected, vec!["only".to_string()]);
    }

    #[test]
    fn prune_keeps_one_of_a_duplicate_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let sig: Vec<f64> = (0..48).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = sig.iter().map(|v| 3.0 * v + 0.5).collect();
        let m = matrix(&["copy_a", "copy_b"], vec![sig.clone(), sig]);
        let sel = prune_by_importance(
            &m,
            &target(y),
            &["copy_a".into(), "copy_b".into()],
            0.5,
            7,
            Component::Random,
        )
        .unwrap();
        assert_eq!(sel.selected.len(), 1);
        // split tie-break prefers the lower column, so the copy actually used
        // by the model is the one that survives
        assert_eq!(sel.selected[0], "copy_a");
    }

    #[test]
    fn prune_prefers_signal_over_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let sig: Vec<f64> = (0..60).map(|_| rng.random_range(-1.0..1.0)).collect();
        let noise: Vec<f64> = (0..60).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = sig.iter().map(|v| 2.0 * v).collect();
        let m = matrix(&["noise", "signal"], vec![noise, sig]);
        let sel = prune_by_importance(
            &m,
            &target(y),
            &["noise".into(), "signal".into()],
            0.5,
            13,
            Component::Random,
        )
        .unwrap();
        assert_eq!(sel.selected, vec!["signal".to_string()]);
        assert!(sel.ranked[0].importance > sel.ranked[1].importance);
    }

    #[test]
    fn selection_is_deterministic_given_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = a.iter().zip(&b).map(|(x, z)| x + 0.2 * z).collect();
        let m = matrix(&["a", "b"], vec![a, b]);
        let s1 = select_component_features(&m, &target(y.clone()), Component::Trend, 0.1, 0.5, 17)
            .unwrap();
        let s2 = select_component_features(&m, &target(y), Component::Trend, 0.1, 0.5, 17).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn empty_screen_falls_back_to_best_single_feature() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let y: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = matrix(&["a", "b"], vec![a, b]);
        // threshold 1.0: nothing passes, so the best |pcc| feature is used
        let sel =
            select_component_features(&m, &target(y), Component::Random, 1.0, 1.0, 3).unwrap();
        assert_eq!(sel.selected.len(), 1);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn pcc_is_symmetric(values in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 3..40)) {
                let (x, y): (Vec<f64>, Vec<f64>) = values.into_iter().unzip();
                if let (Ok(a), Ok(b)) = (pcc(&x, &y), pcc(&y, &x)) {
                    prop_assert!((a - b).abs() <= 1e-12);
                    prop_assert!((-1.0..=1.0).contains(&a));
                }
            }

            #[test]
            fn pcc_affine_invariance(
                values in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 3..40),
                a in 0.01f64..100.0,
                b in -1e3f64..1e3,
            ) {
                let (x, y): (Vec<f64>, Vec<f64>) = values.into_iter().unzip();
                if let Ok(base) = pcc(&x, &y) {
                    let scaled: Vec<f64> = x.iter().map(|v| a * v + b).collect();
                    let flipped: Vec<f64> = x.iter().map(|v| -a * v + b).collect();
                    prop_assert!((pcc(&scaled, &y).unwrap() - base).abs() <= 1e-12);
                    prop_assert!((pcc(&flipped, &y).unwrap() + base).abs() <= 1e-12);
                }
            }
        }
    }
}
