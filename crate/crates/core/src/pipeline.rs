//! The full forecasting pipeline and its ablation variants.
//!
//! A run decomposes the training span of the load series, screens features
//! per component, then forecasts each component over the horizon:
//! the seasonal part copies last year's values, while trend and random go
//! through a two-stage stack — a recurrent first stage whose out-of-sample
//! predictions are appended as an extra feature for a boosted-tree second
//! stage. The stage-1 predictions for second-stage *training* come from
//! expanding-window cross-fitting, so no row is predicted by a model that saw
//! its target. Ablation variants skip the first stage for one or both
//! components; the seasonal forecast is identical across variants.
//!
//! Horizon months never reach decomposition, feature selection, scaling
//! statistics or any training loss; only their exogenous feature rows are
//! read, at prediction time.

use serde::{Deserialize, Serialize};

use crate::decompose::{reconstruct, stl_decompose, StlConfig};
use crate::featsel::{preset_selection, select_component_features, Component, FeatureSelection};
use crate::gbt::{self, FeatureRow, GbtConfig};
use crate::lstm::{adam_train, lstm_forward, AdamConfig, LstmParams, Standardization};
use crate::series::{FeatureMatrix, MonthlySeries, YearMonth};
use crate::{derive_seed, Error, Result};

/// Name of the synthetic column carrying first-stage predictions into the
/// second stage.
pub const STAGE1_COLUMN: &str = "stage1_forecast";

/// Which components receive error correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Correct both trend and random.
    Eclf,
    /// Plain second stage for both components.
    EcNeither,
    /// Correct the random component only.
    EcRc,
    /// Correct the trend component only.
    EcTc,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Eclf,
        Variant::EcNeither,
        Variant::EcRc,
        Variant::EcTc,
    ];

    pub fn corrects(&self, component: Component) -> bool {
        match (self, component) {
            (Variant::Eclf, _) => true,
            (Variant::EcNeither, _) => false,
            (Variant::EcRc, Component::Random) => true,
            (Variant::EcRc, Component::Trend) => false,
            (Variant::EcTc, Component::Trend) => true,
            (Variant::EcTc, Component::Random) => false,
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Variant::Eclf => "ECLF",
            Variant::EcNeither => "EC-Neither",
            Variant::EcRc => "EC-RC",
            Variant::EcTc => "EC-TC",
        };
        write!(f, "{name}")
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ECLF" => Ok(Variant::Eclf),
            "EC-Neither" => Ok(Variant::EcNeither),
            "EC-RC" => Ok(Variant::EcRc),
            "EC-TC" => Ok(Variant::EcTc),
            other => Err(Error::config(format!(
                "unknown variant {other:?}; expected ECLF, EC-Neither, EC-RC or EC-TC"
            ))),
        }
    }
}

/// First-stage (recurrent) settings for one component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LstmStageConfig {
    pub hidden: usize,
    /// Lookback window in months.
    pub window: usize,
    pub adam: AdamConfig,
}

impl Default for LstmStageConfig {
    fn default() -> Self {
        LstmStageConfig {
            hidden: 50,
            window: 12,
            adam: AdamConfig::default(),
        }
    }
}

/// Full pipeline configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EclfConfig {
    pub stl: StlConfig,
    pub pcc_threshold: f64,
    pub keep_fraction: f64,
    /// Explicit trend feature list; skips screening and pruning when set.
    pub trend_features: Option<Vec<String>>,
    /// Explicit random-component feature list; skips screening and pruning
    /// when set.
    pub random_features: Option<Vec<String>>,
    pub lstm_trend: LstmStageConfig,
    pub lstm_random: LstmStageConfig,
    pub gbt_trend: GbtConfig,
    pub gbt_random: GbtConfig,
    pub variant: Variant,
    /// Folds of the expanding-window cross-fit feeding stage 2.
    pub stack_folds: usize,
    pub seed: u64,
}

impl Default for EclfConfig {
    fn default() -> Self {
        EclfConfig {
            stl: StlConfig::default(),
            pcc_threshold: 0.3,
            keep_fraction: 0.5,
            trend_features: None,
            random_features: None,
            lstm_trend: LstmStageConfig::default(),
            lstm_random: LstmStageConfig::default(),
            gbt_trend: GbtConfig::default(),
            gbt_random: GbtConfig::default(),
            variant: Variant::Eclf,
            stack_folds: 4,
            seed: 0,
        }
    }
}

impl EclfConfig {
    pub fn validate(&self) -> Result<()> {
        self.stl.validate()?;
        if !(0.0..=1.0).contains(&self.pcc_threshold) {
            return Err(Error::config("pcc_threshold must lie in [0,1]"));
        }
        if !(self.keep_fraction > 0.0 && self.keep_fraction <= 1.0) {
            return Err(Error::config("keep_fraction must lie in (0,1]"));
        }
        for stage in [&self.lstm_trend, &self.lstm_random] {
            if stage.hidden == 0 || stage.window == 0 {
                return Err(Error::config("lstm hidden and window must be positive"));
            }
            stage.adam.validate()?;
        }
        self.gbt_trend.validate()?;
        self.gbt_random.validate()?;
        if self.stack_folds == 0 {
            return Err(Error::config("stack_folds must be positive"));
        }
        for preset in [&self.trend_features, &self.random_features] {
            if preset.as_ref().is_some_and(|p| p.is_empty()) {
                return Err(Error::config(
                    "a feature preset must name at least one column",
                ));
            }
        }
        Ok(())
    }
}

/// Cross-fit fold: the target months predicted out-of-sample by a model
/// trained on everything strictly before `first`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldRange {
    pub first: YearMonth,
    pub last: YearMonth,
}

/// Per-component training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackDiagnostics {
    pub component: Component,
    pub corrected: bool,
    pub selection: FeatureSelection,
    pub cross_fit_folds: Vec<FoldRange>,
    /// Months carrying a stage-1 prediction (cross-fit rows + horizon).
    pub stage1_rows: usize,
    pub lstm_first_epoch_loss: Option<f64>,
    pub lstm_final_epoch_loss: Option<f64>,
    pub gbt_training_rows: usize,
    pub gbt_final_rmse: f64,
}

/// Run-level training record, serialized next to the forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub variant: String,
    pub seed: u64,
    pub split: YearMonth,
    pub horizon: usize,
    pub trend: StackDiagnostics,
    pub random: StackDiagnostics,
}

/// Component and total forecasts over the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastBundle {
    pub s_hat: MonthlySeries,
    pub t_hat: MonthlySeries,
    pub r_hat: MonthlySeries,
    pub y_hat: MonthlySeries,
    pub diagnostics: Diagnostics,
}

impl ForecastBundle {
    /// CSV rendering with header `date,s_hat,t_hat,r_hat,y_hat`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("date,s_hat,t_hat,r_hat,y_hat\n");
        for (i, (month, y)) in self.y_hat.iter().enumerate() {
            out.push_str(&format!(
                "{month},{},{},{},{y}\n",
                self.s_hat.values()[i],
                self.t_hat.values()[i],
                self.r_hat.values()[i],
            ));
        }
        out
    }
}

/// Seasonal-naive forecast: each horizon month copies the seasonal value of
/// the same month one year earlier.
pub fn seasonal_naive(
    seasonal: &MonthlySeries,
    horizon_start: YearMonth,
    horizon: usize,
) -> Result<MonthlySeries> {
    if horizon == 0 {
        return Err(Error::config("horizon must be positive"));
    }
    let mut values = Vec::with_capacity(horizon);
    for k in 0..horizon {
        let month = horizon_start.plus_months(k as i64);
        let source = month.plus_months(-12);
        let v = seasonal.get(source).ok_or(Error::Range {
            from: source,
            to: source,
            start: seasonal.start(),
            end: seasonal.end(),
        })?;
        values.push(v);
    }
    MonthlySeries::new(horizon_start, values)
}

// ---------------------------------------------------------------------------
// error-correction stack internals

struct StackInputs<'a> {
    /// Component values over the training months.
    component: &'a MonthlySeries,
    /// Selected feature columns over training + horizon months.
    features: FeatureMatrix,
    horizon: usize,
}

impl StackInputs<'_> {
    fn train_len(&self) -> usize {
        self.component.len()
    }

    /// Input vector for one month: component value first, then the selected
    /// features of that month.
    fn input_vector(&self, month_idx: usize, component_value: f64) -> Vec<f64> {
        let mut v = Vec::with_capacity(1 + self.features.names().len());
        v.push(component_value);
        for c in 0..self.features.names().len() {
            v.push(self.features.column_by_index(c)[month_idx]);
        }
        v
    }
}

/// Scaling statistics fitted on months `0..upto` only.
fn fit_scaler(inputs: &StackInputs, upto: usize) -> Standardization {
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(1 + inputs.features.names().len());
    columns.push(inputs.component.values()[..upto].to_vec());
    for c in 0..inputs.features.names().len() {
        columns.push(inputs.features.column_by_index(c)[..upto].to_vec());
    }
    let targets = &inputs.component.values()[..upto];
    Standardization::fit(&columns, targets)
}

/// Standardized training sample for target month `target_idx`.
fn sample(
    inputs: &StackInputs,
    scaler: &Standardization,
    window: usize,
    target_idx: usize,
) -> (Vec<Vec<f64>>, f64) {
    let xs: Vec<Vec<f64>> = (target_idx - window..target_idx)
        .map(|m| scaler.scale_input(&inputs.input_vector(m, inputs.component.values()[m])))
        .collect();
    let y = scaler.scale_target(inputs.component.values()[target_idx]);
    (xs, y)
}

struct Stage1Output {
    /// Stage-1 predictions for the cross-fit months (last `cross_len` months
    /// of training), in month order.
    cross_predictions: Vec<f64>,
    cross_start_idx: usize,
    /// Stage-1 predictions for the horizon months.
    horizon_predictions: Vec<f64>,
    folds: Vec<FoldRange>,
    first_epoch_loss: f64,
    final_epoch_loss: f64,
}

/// Expanding-window cross-fit over the tail of the training region, plus a
/// final model trained on all samples for the recursive horizon forecast.
fn stage1(
    inputs: &StackInputs,
    stage_cfg: &LstmStageConfig,
    stack_folds: usize,
    stack_seed: u64,
) -> Result<Stage1Output> {
    let window = stage_cfg.window;
    let train_len = inputs.train_len();
    if train_len < window + 13 {
        return Err(Error::InsufficientData {
            actual: train_len,
            required: window + 13,
        });
    }
    // samples are target months window..train_len
    let n_samples = train_len - window;
    let cross_len = (n_samples / 2).max(12);
    let initial = n_samples - cross_len;

    let input_dim = 1 + inputs.features.names().len();
    let train_adam = |seed_tag: &str, samples: &[(Vec<Vec<f64>>, f64)], init_tag: &str| {
        let params = LstmParams::init(
            stage_cfg.hidden,
            input_dim,
            derive_seed(stack_seed, init_tag),
        );
        let adam = AdamConfig {
            seed: derive_seed(stack_seed, seed_tag),
            ..stage_cfg.adam
        };
        adam_train(params, samples, &adam)
    };

    // cross-fit folds over sample indices [initial, n_samples)
    let mut folds = Vec::with_capacity(stack_folds);
    let mut cross_predictions = Vec::with_capacity(cross_len);
    let per_fold = cross_len.div_ceil(stack_folds);
    let mut fold_start = initial;
    let mut fold_no = 0usize;
    while fold_start < n_samples {
        let fold_end = (fold_start + per_fold).min(n_samples);
        // months available to this fold's model: targets strictly before it
        let scaler = fit_scaler(inputs, fold_start + window);
        let train_samples: Vec<(Vec<Vec<f64>>, f64)> = (window..fold_start + window)
            .map(|t| sample(inputs, &scaler, window, t))
            .collect();
        let outcome = train_adam(
            &format!("fold-{fold_no}-adam"),
            &train_samples,
            &format!("fold-{fold_no}-init"),
        )?;
        for s in fold_start..fold_end {
            let target_idx = s + window;
            let (xs, _) = sample(inputs, &scaler, window, target_idx);
            let pred = scaler.unscale_target(lstm_forward(&outcome.params, &xs));
            cross_predictions.push(pred);
        }
        folds.push(FoldRange {
            first: inputs.component.month_at(fold_start + window),
            last: inputs.component.month_at(fold_end - 1 + window),
        });
        fold_start = fold_end;
        fold_no += 1;
    }

    // final model on every training sample, then recursive horizon forecast
    let scaler = fit_scaler(inputs, train_len);
    let all_samples: Vec<(Vec<Vec<f64>>, f64)> = (window..train_len)
        .map(|t| sample(inputs, &scaler, window, t))
        .collect();
    let outcome = train_adam("final-adam", &all_samples, "final-init")?;

    let mut known: Vec<f64> = inputs.component.values().to_vec();
    let mut horizon_predictions = Vec::with_capacity(inputs.horizon);
    for k in 0..inputs.horizon {
        let target_idx = train_len + k;
        let xs: Vec<Vec<f64>> = (target_idx - window..target_idx)
            .map(|m| scaler.scale_input(&inputs.input_vector(m, known[m])))
            .collect();
        let pred = scaler.unscale_target(lstm_forward(&outcome.params, &xs));
        horizon_predictions.push(pred);
        known.push(pred);
    }

    Ok(Stage1Output {
        cross_predictions,
        cross_start_idx: initial + window,
        horizon_predictions,
        folds,
        first_epoch_loss: outcome.epoch_losses[0],
        final_epoch_loss: *outcome.epoch_losses.last().expect("epochs >= 1"),
    })
}

/// Builds the stage-2 matrix over the given month rows, optionally appending
/// the stage-1 prediction column.
fn stage2_row(inputs: &StackInputs, month_idx: usize, stage1_value: Option<f64>) -> FeatureRow {
    let mut row: FeatureRow = inputs
        .features
        .names()
        .iter()
        .enumerate()
        .map(|(c, name)| (name.clone(), inputs.features.column_by_index(c)[month_idx]))
        .collect();
    if let Some(v) = stage1_value {
        row.insert(STAGE1_COLUMN.to_string(), v);
    }
    row
}

/// One component's forecast through the (optionally corrected) stack.
pub fn error_correction_stack(
    component: &MonthlySeries,
    features: &FeatureMatrix,
    selection: &FeatureSelection,
    cfg: &EclfConfig,
    which: Component,
    horizon: usize,
) -> Result<(MonthlySeries, StackDiagnostics)> {
    cfg.validate()?;
    if horizon == 0 {
        return Err(Error::config("horizon must be positive"));
    }
    if features.start() != component.start() || features.row_count() != component.len() + horizon {
        return Err(Error::alignment(format!(
            "stack features must cover training ({} months from {}) plus horizon {}",
            component.len(),
            component.start(),
            horizon
        )));
    }

    let (stage_cfg, gbt_cfg) = match which {
        Component::Trend => (&cfg.lstm_trend, &cfg.gbt_trend),
        Component::Random => (&cfg.lstm_random, &cfg.gbt_random),
    };
    let corrected = cfg.variant.corrects(which);
    let stack_seed = derive_seed(
        cfg.seed,
        match which {
            Component::Trend => "stack-trend",
            Component::Random => "stack-random",
        },
    );

    let inputs = StackInputs {
        component,
        features: features.select(&selection.selected)?,
        horizon,
    };
    let train_len = inputs.train_len();
    let horizon_start = component.start().plus_months(train_len as i64);

    let (forecast, diag) = if corrected {
        let s1 = stage1(&inputs, stage_cfg, cfg.stack_folds, stack_seed)?;
        let cross_len = s1.cross_predictions.len();
        if cross_len < 12 {
            return Err(Error::InsufficientData {
                actual: cross_len,
                required: 12,
            });
        }

        // stage 2: gbt on cross-fit rows with the stage-1 column appended
        let mut names: Vec<String> = inputs.features.names().to_vec();
        names.push(STAGE1_COLUMN.to_string());
        let mut columns: Vec<Vec<f64>> = (0..inputs.features.names().len())
            .map(|c| {
                inputs.features.column_by_index(c)
                    [s1.cross_start_idx..s1.cross_start_idx + cross_len]
                    .to_vec()
            })
            .collect();
        columns.push(s1.cross_predictions.clone());
        let stage2_matrix = FeatureMatrix::new(
            component.start().plus_months(s1.cross_start_idx as i64),
            names,
            columns,
        )?;
        let stage2_targets = MonthlySeries::new(
            stage2_matrix.start(),
            component.values()[s1.cross_start_idx..s1.cross_start_idx + cross_len].to_vec(),
        )?;
        let fit = gbt::fit_gbt(
            &stage2_matrix,
            &stage2_targets,
            gbt_cfg,
            derive_seed(stack_seed, "gbt"),
        )?;

        let mut values = Vec::with_capacity(horizon);
        for k in 0..horizon {
            let row = stage2_row(&inputs, train_len + k, Some(s1.horizon_predictions[k]));
            values.push(gbt::predict_gbt(&fit.model, &row)?);
        }
        let diag = StackDiagnostics {
            component: which,
            corrected: true,
            selection: selection.clone(),
            cross_fit_folds: s1.folds,
            stage1_rows: cross_len + horizon,
            lstm_first_epoch_loss: Some(s1.first_epoch_loss),
            lstm_final_epoch_loss: Some(s1.final_epoch_loss),
            gbt_training_rows: cross_len,
            gbt_final_rmse: *fit.training_rmse.last().expect("rounds >= 1"),
        };
        (MonthlySeries::new(horizon_start, values)?, diag)
    } else {
        // plain second stage on the whole training region
        let train_matrix = inputs.features.slice_rows(0, train_len)?;
        let fit = gbt::fit_gbt(
            &train_matrix,
            component,
            gbt_cfg,
            derive_seed(stack_seed, "gbt"),
        )?;
        let mut values = Vec::with_capacity(horizon);
        for k in 0..horizon {
            let row = stage2_row(&inputs, train_len + k, None);
            values.push(gbt::predict_gbt(&fit.model, &row)?);
        }
        let diag = StackDiagnostics {
            component: which,
            corrected: false,
            selection: selection.clone(),
            cross_fit_folds: Vec::new(),
            stage1_rows: 0,
            lstm_first_epoch_loss: None,
            lstm_final_epoch_loss: None,
            gbt_training_rows: train_len,
            gbt_final_rmse: *fit.training_rmse.last().expect("rounds >= 1"),
        };
        (MonthlySeries::new(horizon_start, values)?, diag)
    };

    Ok((forecast, diag))
}

/// Runs the whole pipeline: decomposition and feature selection on the
/// training span, component forecasts over the horizon, additive
/// reconstruction. `split` is the first forecast month; everything before it
/// is training. The horizon is bounded by the feature rows available.
pub fn run_eclf(
    load: &MonthlySeries,
    features: &FeatureMatrix,
    cfg: &EclfConfig,
    split: YearMonth,
) -> Result<ForecastBundle> {
    cfg.validate()?;
    if load.start() != features.start() || load.len() != features.row_count() {
        return Err(Error::alignment(format!(
            "load covers {} months from {}, features {} rows from {}",
            load.len(),
            load.start(),
            features.row_count(),
            features.start()
        )));
    }
    let train_len = split.months_since(load.start());
    if train_len < 36 {
        return Err(Error::InsufficientData {
            actual: train_len.max(0) as usize,
            required: 36,
        });
    }
    let train_len = train_len as usize;
    let horizon = load.len() - train_len;
    if !(1..=12).contains(&horizon) {
        return Err(Error::config(format!(
            "horizon of {horizon} months outside 1..=12 (split {split})"
        )));
    }

    // training-only views
    let train_load = load.slice(load.start(), split.prev())?;
    let train_features = features.slice_rows(0, train_len)?;
    let stack_features = features.slice_rows(0, train_len + horizon)?;

    let decomposition =
        stl_decompose(&train_load, &cfg.stl).map_err(Error::in_stage("decompose"))?;

    let sel_trend = match &cfg.trend_features {
        Some(names) => preset_selection(
            &train_features,
            &decomposition.trend,
            Component::Trend,
            names,
        ),
        None => select_component_features(
            &train_features,
            &decomposition.trend,
            Component::Trend,
            cfg.pcc_threshold,
            cfg.keep_fraction,
            derive_seed(cfg.seed, "select-trend"),
        ),
    }
    .map_err(Error::in_stage("select trend features"))?;
    let sel_random = match &cfg.random_features {
        Some(names) => preset_selection(
            &train_features,
            &decomposition.remainder,
            Component::Random,
            names,
        ),
        None => select_component_features(
            &train_features,
            &decomposition.remainder,
            Component::Random,
            cfg.pcc_threshold,
            cfg.keep_fraction,
            derive_seed(cfg.seed, "select-random"),
        ),
    }
    .map_err(Error::in_stage("select random features"))?;

    let s_hat = seasonal_naive(&decomposition.seasonal, split, horizon)
        .map_err(Error::in_stage("seasonal naive"))?;
    let (t_hat, trend_diag) = error_correction_stack(
        &decomposition.trend,
        &stack_features,
        &sel_trend,
        cfg,
        Component::Trend,
        horizon,
    )
    .map_err(Error::in_stage("trend stack"))?;
    let (r_hat, random_diag) = error_correction_stack(
        &decomposition.remainder,
        &stack_features,
        &sel_random,
        cfg,
        Component::Random,
        horizon,
    )
    .map_err(Error::in_stage("random stack"))?;

    let y_hat = reconstruct(&s_hat, &t_hat, &r_hat).map_err(Error::in_stage("reconstruct"))?;
    Ok(ForecastBundle {
        s_hat,
        t_hat,
        r_hat,
        y_hat,
        diagnostics: Diagnostics {
            variant: cfg.variant.to_string(),
            seed: cfg.seed,
            split,
            horizon,
            trend: trend_diag,
            random: random_diag,
        },
    })
}

/// Holdout MAPE of a bundle against the actual load over its horizon.
pub fn holdout_mape(bundle: &ForecastBundle, load: &MonthlySeries) -> Result<f64> {
    let actual = load.slice(bundle.y_hat.start(), bundle.y_hat.end())?;
    crate::evalstat::mape(actual.values(), bundle.y_hat.values())
}

/// Runs all four variants with the same seed and returns each bundle with its
/// holdout MAPE, in the fixed [`Variant::ALL`] order.
pub fn run_ablation(
    load: &MonthlySeries,
    features: &FeatureMatrix,
    cfg: &EclfConfig,
    split: YearMonth,
) -> Result<Vec<(Variant, f64, ForecastBundle)>> {
    let mut out = Vec::with_capacity(Variant::ALL.len());
    for variant in Variant::ALL {
        let run_cfg = EclfConfig {
            variant,
            ..cfg.clone()
        };
        let bundle = run_eclf(load, features, &run_cfg, split)?;
        let mape = holdout_mape(&bundle, load)?;
        out.push((variant, mape, bundle));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{self, SynthConfig};

    fn ym(year: i32, month: u8) -> YearMonth {
        YearMonth::new(year, month).unwrap()
    }

    /// Small configuration keeping test runtime reasonable.
    fn quick_config(seed: u64) -> EclfConfig {
        let lstm = LstmStageConfig {
            hidden: 8,
            window: 12,
            adam: AdamConfig {
                epochs: 25,
                batch_size: 12,
                lr: 5e-3,
                ..AdamConfig::default()
            },
        };
        let gbt = GbtConfig {
            n_estimators: 80,
            ..GbtConfig::default()
        };
        EclfConfig {
            lstm_trend: lstm,
            lstm_random: lstm,
            gbt_trend: gbt,
            gbt_random: gbt,
            seed,
            ..EclfConfig::default()
        }
    }

    fn fixture() -> (MonthlySeries, FeatureMatrix) {
        synth::generate(&SynthConfig {
            seed: 42,
            years: 9,
            noise_sd: 22.0,
        })
        .unwrap()
    }

    #[test]
    fn seasonal_naive_copies_last_year() {
        let values: Vec<f64> = (0..36).map(|t| (t % 12) as f64 * 1.5 - 2.0).collect();
        let seasonal = MonthlySeries::new(ym(2018, 1), values).unwrap();
        let fc = seasonal_naive(&seasonal, ym(2021, 1), 12).unwrap();
        // exactly periodic seasonal: zero forecast error against the pattern
        for (month, v) in fc.iter() {
            assert_eq!(v, ((month.month - 1) as f64) * 1.5 - 2.0);
        }
        assert_eq!(
            fc.get(ym(2021, 3)).unwrap(),
            seasonal.get(ym(2020, 3)).unwrap()
        );
    }

    #[test]
    fn seasonal_naive_horizon_one() {
        let seasonal = MonthlySeries::new(ym(2020, 1), vec![7.5; 12]).unwrap();
        let fc = seasonal_naive(&seasonal, ym(2021, 1), 1).unwrap();
        assert_eq!(fc.values(), &[7.5]);
    }

    #[test]
    fn seasonal_naive_needs_last_year() {
        let seasonal = MonthlySeries::new(ym(2020, 6), vec![1.0; 7]).unwrap();
        assert!(matches!(
            seasonal_naive(&seasonal, ym(2021, 1), 12),
            Err(Error::Range { .. })
        ));
    }

    #[test]
    fn run_is_deterministic() {
        let (load, feats) = fixture();
        let cfg = quick_config(5);
        let a = run_eclf(&load, &feats, &cfg, ym(2021, 1)).unwrap();
        let b = run_eclf(&load, &feats, &cfg, ym(2021, 1)).unwrap();
        assert_eq!(a.y_hat, b.y_hat);
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.diagnostics, b.diagnostics);
    }

    #[test]
    fn bundle_is_additive() {
        let (load, feats) = fixture();
        let bundle = run_eclf(&load, &feats, &quick_config(1), ym(2021, 1)).unwrap();
        for i in 0..bundle.y_hat.len() {
            let sum =
                bundle.s_hat.values()[i] + bundle.t_hat.values()[i] + bundle.r_hat.values()[i];
            assert!((sum - bundle.y_hat.values()[i]).abs() <= 1e-9);
        }
        assert_eq!(bundle.y_hat.start(), ym(2021, 1));
        assert_eq!(bundle.y_hat.len(), 12);
    }

    #[test]
    fn stage1_rows_cover_cross_fit_and_horizon() {
        let (load, feats) = fixture();
        let bundle = run_eclf(&load, &feats, &quick_config(2), ym(2021, 1)).unwrap();
        // 96 training months, window 12 -> 84 samples, cross region 42
        assert_eq!(bundle.diagnostics.trend.stage1_rows, 42 + 12);
        assert_eq!(bundle.diagnostics.trend.gbt_training_rows, 42);
        assert!(!bundle.diagnostics.trend.cross_fit_folds.is_empty());
    }

    #[test]
    fn cross_fit_folds_follow_their_training_data() {
        let (load, feats) = fixture();
        let bundle = run_eclf(&load, &feats, &quick_config(3), ym(2021, 1)).unwrap();
        for diag in [&bundle.diagnostics.trend, &bundle.diagnostics.random] {
            let folds = &diag.cross_fit_folds;
            for pair in folds.windows(2) {
                assert!(pair[0].last < pair[1].first, "folds must not overlap");
            }
            // all folds sit inside the training span and end before the split
            for f in folds {
                assert!(f.first <= f.last);
                assert!(f.last < ym(2021, 1));
            }
        }
    }

    #[test]
    fn uncorrected_variant_skips_stage_one() {
        let (load, feats) = fixture();
        let cfg = EclfConfig {
            variant: Variant::EcNeither,
            ..quick_config(4)
        };
        let bundle = run_eclf(&load, &feats, &cfg, ym(2021, 1)).unwrap();
        for diag in [&bundle.diagnostics.trend, &bundle.diagnostics.random] {
            assert!(!diag.corrected);
            assert_eq!(diag.stage1_rows, 0);
            assert!(diag.lstm_final_epoch_loss.is_none());
            assert!(diag.cross_fit_folds.is_empty());
            assert_eq!(diag.gbt_training_rows, 96);
        }
    }

    #[test]
    fn variants_share_seasonal_and_uncorrected_components() {
        let (load, feats) = fixture();
        let base = quick_config(6);
        let split = ym(2021, 1);
        let eclf = run_eclf(&load, &feats, &base, split).unwrap();
        let ec_tc = run_eclf(
            &load,
            &feats,
            &EclfConfig {
                variant: Variant::EcTc,
                ..base.clone()
            },
            split,
        )
        .unwrap();
        let ec_rc = run_eclf(
            &load,
            &feats,
            &EclfConfig {
                variant: Variant::EcRc,
                ..base.clone()
            },
            split,
        )
        .unwrap();
        let neither = run_eclf(
            &load,
            &feats,
            &EclfConfig {
                variant: Variant::EcNeither,
                ..base
            },
            split,
        )
        .unwrap();

        // seasonal path is variant-independent
        assert_eq!(eclf.s_hat, ec_tc.s_hat);
        assert_eq!(eclf.s_hat, ec_rc.s_hat);
        assert_eq!(eclf.s_hat, neither.s_hat);
        // each partial variant shares its corrected component with the full
        // model and its uncorrected component with the plain model
        assert_eq!(ec_tc.t_hat, eclf.t_hat);
        assert_eq!(ec_tc.r_hat, neither.r_hat);
        assert_eq!(ec_rc.r_hat, eclf.r_hat);
        assert_eq!(ec_rc.t_hat, neither.t_hat);
    }

    #[test]
    fn horizon_load_values_cannot_leak_into_training() {
        let (load, feats) = fixture();
        let cfg = quick_config(7);
        let split = ym(2021, 1);
        let bundle = run_eclf(&load, &feats, &cfg, split).unwrap();

        // poison the horizon load values; everything must be bit-identical
        // because training never reads them
        let mut poisoned = load.values().to_vec();
        for v in poisoned.iter_mut().skip(96) {
            *v = 9.9e12;
        }
        let poisoned_load = MonthlySeries::new(load.start(), poisoned).unwrap();
        let bundle2 = run_eclf(&poisoned_load, &feats, &cfg, split).unwrap();
        assert_eq!(bundle.y_hat, bundle2.y_hat);
        assert_eq!(bundle.diagnostics, bundle2.diagnostics);
    }

    #[test]
    fn horizon_feature_rows_only_affect_predictions() {
        let (load, feats) = fixture();
        let cfg = quick_config(8);
        let split = ym(2021, 1);
        let bundle = run_eclf(&load, &feats, &cfg, split).unwrap();

        // poison the horizon feature rows: training-side diagnostics must not
        // move (they never read those rows), while forecasts may
        let mut columns: Vec<Vec<f64>> = (0..feats.names().len())
            .map(|c| feats.column_by_index(c).to_vec())
            .collect();
        for col in &mut columns {
            for v in col.iter_mut().skip(96) {
                *v += 1.0e6;
            }
        }
        let poisoned = FeatureMatrix::new(feats.start(), feats.names().to_vec(), columns).unwrap();
        let bundle2 = run_eclf(&load, &poisoned, &cfg, split).unwrap();
        for (a, b) in [
            (&bundle.diagnostics.trend, &bundle2.diagnostics.trend),
            (&bundle.diagnostics.random, &bundle2.diagnostics.random),
        ] {
            assert_eq!(a.selection, b.selection);
            assert_eq!(a.lstm_first_epoch_loss, b.lstm_first_epoch_loss);
            assert_eq!(a.lstm_final_epoch_loss, b.lstm_final_epoch_loss);
            assert_eq!(a.gbt_final_rmse, b.gbt_final_rmse);
            assert_eq!(a.cross_fit_folds, b.cross_fit_folds);
        }
    }

    #[test]
    fn feature_presets_bypass_automatic_selection() {
        let (load, feats) = fixture();
        let cfg = EclfConfig {
            trend_features: Some(vec![
                "month_sin".into(),
                "month_cos".into(),
                "avg_temp".into(),
                "off_days".into(),
            ]),
            random_features: Some(vec!["avg_temp".into(), "off_days".into()]),
            ..quick_config(12)
        };
        let bundle = run_eclf(&load, &feats, &cfg, ym(2021, 1)).unwrap();
        assert_eq!(
            bundle.diagnostics.trend.selection.selected,
            vec!["month_sin", "month_cos", "avg_temp", "off_days"]
        );
        assert_eq!(
            bundle.diagnostics.random.selection.selected,
            vec!["avg_temp", "off_days"]
        );

        let unknown = EclfConfig {
            random_features: Some(vec!["nope".into()]),
            ..quick_config(12)
        };
        match run_eclf(&load, &feats, &unknown, ym(2021, 1)) {
            Err(Error::Stage { source, .. }) => {
                assert!(matches!(*source, Error::MissingFeature { .. }));
            }
            other => panic!("expected missing-feature stage error, got {other:?}"),
        }
    }

    #[test]
    fn partial_horizon_forecasts_remaining_months() {
        let (load, feats) = fixture();
        let load = load.slice(load.start(), ym(2021, 6)).unwrap();
        let feats = feats.slice_rows(0, load.len()).unwrap();
        let bundle = run_eclf(&load, &feats, &quick_config(10), ym(2021, 1)).unwrap();
        assert_eq!(bundle.y_hat.len(), 6);
        assert_eq!(bundle.y_hat.start(), ym(2021, 1));
        assert_eq!(bundle.y_hat.end(), ym(2021, 6));
        assert_eq!(bundle.diagnostics.horizon, 6);
    }

    #[test]
    fn rejects_short_training_span_and_long_horizon() {
        let (load, feats) = fixture();
        assert!(matches!(
            run_eclf(&load, &feats, &quick_config(0), ym(2015, 1)),
            Err(Error::InsufficientData { .. }) | Err(Error::Config { .. })
        ));
        assert!(run_eclf(&load, &feats, &quick_config(0), ym(2020, 6)).is_err());
    }

    #[test]
    fn stack_tracks_component_linear_in_one_feature() {
        // component linear in an oscillating driver with faint noise: the
        // stack should forecast the holdout year within 2%
        let n = 108usize;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1234);
        use rand::{Rng, SeedableRng};
        let driver: Vec<f64> = (0..n)
            .map(|t| (t as f64 * 0.45).sin() * 10.0 + rng.random_range(-1.0..1.0))
            .collect();
        let component_values: Vec<f64> = driver
            .iter()
            .map(|d| 200.0 + 4.0 * d + rng.random_range(-0.5..0.5))
            .collect();
        let start = ym(2013, 1);
        let features = FeatureMatrix::new(start, vec!["driver".into()], vec![driver]).unwrap();
        let component = MonthlySeries::new(start, component_values[..96].to_vec()).unwrap();
        let selection = FeatureSelection {
            component: Component::Random,
            ranked: vec![crate::featsel::RankedFeature {
                name: "driver".into(),
                pcc: 1.0,
                importance: 1.0,
            }],
            selected: vec!["driver".into()],
        };
        let cfg = quick_config(11);
        let (forecast, diag) = error_correction_stack(
            &component,
            &features,
            &selection,
            &cfg,
            Component::Random,
            12,
        )
        .unwrap();
        assert!(diag.corrected);
        let actual = &component_values[96..];
        let mape = crate::evalstat::mape(actual, forecast.values()).unwrap();
        assert!(mape < 2.0, "holdout MAPE {mape:.3}%");
    }

    #[test]
    fn documented_defaults() {
        let cfg = EclfConfig::default();
        assert_eq!(cfg.lstm_trend.hidden, 50);
        assert_eq!(cfg.lstm_trend.adam.batch_size, 12);
        assert_eq!(cfg.lstm_trend.adam.epochs, 120);
        assert_eq!(cfg.lstm_trend.window, 12);
        assert_eq!(cfg.gbt_trend.n_estimators, 300);
        assert_eq!(cfg.gbt_trend.max_depth, 2);
        assert!((cfg.gbt_trend.learning_rate - 0.11).abs() < 1e-12);
        assert!((cfg.pcc_threshold - 0.3).abs() < 1e-12);
        assert_eq!(cfg.stack_folds, 4);
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            let name = v.to_string();
            assert_eq!(name.parse::<Variant>().unwrap(), v);
        }
        assert!("eclf".parse::<Variant>().is_err());
    }
}
