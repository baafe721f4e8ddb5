//! Batch CLI for the load forecasting pipeline.
//!
//! Subcommands: `synth`, `decompose`, `select-features`, `forecast`,
//! `ablate`, `evaluate`. Every run writes its artifacts plus a manifest
//! (resolved configuration, seed, content hashes) so results can be
//! reproduced byte for byte. Errors leave a single machine-parseable JSON
//! line on stderr and a nonzero exit code.

mod config;
mod svg;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Arg, ArgAction, ArgMatches, Command};

use config::Settings;
use eclf_core::featsel::Component;
use eclf_core::pipeline::{run_ablation, run_eclf};
use eclf_core::series::{dataset_to_csv, parse_dataset, YearMonth};
use eclf_core::synth;
use eclf_core::{derive_seed, evalstat};

fn main() {
    if let Err(err) = run() {
        let line = serde_json::json!({ "error": format!("{err:#}") });
        eprintln!("{line}");
        std::process::exit(1);
    }
}

fn tunable_args() -> Vec<Arg> {
    config::KEYS
        .iter()
        .map(|(key, default, help)| {
            Arg::new(*key)
                .long(*key)
                .value_name("VALUE")
                .help(format!("{help} [default: {default}]"))
        })
        .collect()
}

fn build_cli() -> Command {
    let input = Arg::new("input")
        .long("input")
        .value_name("CSV")
        .required(true)
        .help("dataset file with header `date,load,<feature...>`");

    Command::new("eclf")
        .about("Mid-term electricity load forecasting with seasonal decomposition and error-correction stacking")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("out-dir")
                .long("out-dir")
                .value_name("DIR")
                .default_value("out")
                .global(true)
                .help("directory for artifacts and manifests"),
        )
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .global(true)
                .help("config file with [section] headers and key = value lines"),
        )
        .arg(
            Arg::new("seed")
                .long("seed")
                .value_name("N")
                .global(true)
                .help("base RNG seed (overrides run.seed)"),
        )
        .arg(
            Arg::new("svg")
                .long("svg")
                .action(ArgAction::SetTrue)
                .global(true)
                .help("also write an SVG chart next to the CSV artifact"),
        )
        .subcommand(
            Command::new("synth")
                .about("Generate a deterministic synthetic dataset")
                .arg(Arg::new("years").long("years").value_name("N").default_value("9"))
                .arg(
                    Arg::new("noise-sd")
                        .long("noise-sd")
                        .value_name("SD")
                        .default_value("22.0")
                        .help("standard deviation of the additive load noise"),
                )
                .arg(
                    Arg::new("out")
                        .long("out")
                        .value_name("CSV")
                        .help("output path [default: <out-dir>/dataset.csv]"),
                ),
        )
        .subcommand(
            Command::new("decompose")
                .about("Split a load series into seasonal, trend and remainder")
                .arg(input.clone())
                .args(tunable_args()),
        )
        .subcommand(
            Command::new("select-features")
                .about("Screen and prune features for one component")
                .arg(input.clone())
                .arg(
                    Arg::new("component")
                        .long("component")
                        .value_name("WHICH")
                        .required(true)
                        .value_parser(["trend", "random"]),
                )
                .args(tunable_args()),
        )
        .subcommand(
            Command::new("forecast")
                .about("Train the pipeline and forecast the holdout months")
                .arg(input.clone())
                .args(tunable_args()),
        )
        .subcommand(
            Command::new("ablate")
                .about("Run all four correction variants and tabulate holdout MAPE")
                .arg(input.clone())
                .args(tunable_args()),
        )
        .subcommand(
            Command::new("evaluate")
                .about("Derived comparison statistics for a MAPE table")
                .arg(
                    Arg::new("fixtures")
                        .long("fixtures")
                        .value_name("CSV")
                        .required(true)
                        .help("table with header `model,m1,...`"),
                )
                .arg(
                    Arg::new("reference")
                        .long("reference")
                        .value_name("MODEL")
                        .default_value("ECLF"),
                )
                .arg(Arg::new("alpha").long("alpha").value_name("A").default_value("0.05"))
                .arg(
                    Arg::new("first-month")
                        .long("first-month")
                        .value_name("YYYY-MM")
                        .default_value("2021-01")
                        .help("calendar month of the table's first column"),
                ),
        )
}

fn run() -> Result<()> {
    let matches = build_cli().get_matches();
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let out_dir = PathBuf::from(sub.get_one::<String>("out-dir").expect("default"));
    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    match name {
        "synth" => cmd_synth(sub, &out_dir),
        "decompose" => cmd_decompose(sub, &out_dir),
        "select-features" => cmd_select(sub, &out_dir),
        "forecast" => cmd_forecast(sub, &out_dir),
        "ablate" => cmd_ablate(sub, &out_dir),
        "evaluate" => cmd_evaluate(sub, &out_dir),
        other => anyhow::bail!("unknown command {other}"),
    }
}

fn settings_for(sub: &ArgMatches) -> Result<Settings> {
    let mut settings = Settings::defaults();
    if let Some(path) = sub.get_one::<String>("config") {
        let text = fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
        settings.apply_file(&text, path)?;
    }
    if sub.try_get_one::<String>(config::KEYS[0].0).is_ok() {
        settings.apply_overrides(sub)?;
    }
    if let Some(seed) = sub.get_one::<String>("seed") {
        let parsed: u64 = seed.parse().context("--seed must be an integer")?;
        settings.set("run.seed", &parsed.to_string())?;
    }
    Ok(settings)
}

fn load_dataset(
    sub: &ArgMatches,
) -> Result<(
    String,
    eclf_core::series::MonthlySeries,
    eclf_core::series::FeatureMatrix,
)> {
    let path = sub.get_one::<String>("input").expect("required").clone();
    let text = fs::read_to_string(&path).with_context(|| format!("reading {path}"))?;
    let (load, features) = parse_dataset(&text)?;
    Ok((path, load, features))
}

// --------------------------------------------------------------------------
// manifests

fn fnv1a64(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

fn file_entry(path: &Path) -> Result<serde_json::Value> {
    let bytes = fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(serde_json::json!({
        "path": path.to_string_lossy(),
        "fnv1a64": fnv1a64(&bytes),
        "bytes": bytes.len(),
    }))
}

fn write_manifest(
    out_dir: &Path,
    command: &str,
    settings: Option<&Settings>,
    seed: u64,
    inputs: &[(&str, &Path)],
    outputs: &[(&str, &Path)],
    extra: serde_json::Value,
) -> Result<PathBuf> {
    let mut input_map = serde_json::Map::new();
    for (label, path) in inputs {
        input_map.insert(label.to_string(), file_entry(path)?);
    }
    let mut output_map = serde_json::Map::new();
    for (label, path) in outputs {
        output_map.insert(label.to_string(), file_entry(path)?);
    }
    let manifest = serde_json::json!({
        "command": command,
        "seed": seed,
        "config": settings.map(Settings::echo),
        "inputs": input_map,
        "outputs": output_map,
        "extra": extra,
    });
    let path = out_dir.join(format!("{command}_manifest.json"));
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(path)
}

fn write_artifact(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

// --------------------------------------------------------------------------
// commands

fn cmd_synth(sub: &ArgMatches, out_dir: &Path) -> Result<()> {
    let settings = settings_for(sub)?;
    let years: usize = sub.get_one::<String>("years").expect("default").parse()?;
    let noise_sd: f64 = sub
        .get_one::<String>("noise-sd")
        .expect("default")
        .parse()?;
    let seed = settings.seed()?;
    let out = sub
        .get_one::<String>("out")
        .map(PathBuf::from)
        .unwrap_or_else(|| out_dir.join("dataset.csv"));

    let request = synth::SynthConfig {
        seed,
        years,
        noise_sd,
    };
    let (load, features) = synth::generate(&request)?;
    write_artifact(&out, &dataset_to_csv(&load, &features)?)?;

    write_manifest(
        out_dir,
        "synth",
        None,
        seed,
        &[],
        &[("dataset", &out)],
        serde_json::json!({
            "years": years,
            "noise_sd": noise_sd,
            "generator": {
                "base_level": synth::BASE_LEVEL,
                "trend_slope": synth::TREND_SLOPE,
                "season_profile": synth::SEASON_PROFILE,
                "temp_coeff": synth::TEMP_COEFF,
                "temp_base": synth::TEMP_BASE,
                "temp_amplitude": synth::TEMP_AMPLITUDE,
                "ar_phi": synth::AR_PHI,
                "anomaly_sd": synth::ANOMALY_SD,
            },
        }),
    )?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_decompose(sub: &ArgMatches, out_dir: &Path) -> Result<()> {
    let settings = settings_for(sub)?;
    let (input_path, load, _) = load_dataset(sub)?;
    let decomposition = eclf_core::decompose::stl_decompose(&load, &settings.stl()?)?;

    let csv_path = out_dir.join("decomposition.csv");
    write_artifact(&csv_path, &decomposition.to_csv())?;

    let mut outputs: Vec<(&str, PathBuf)> = vec![("decomposition", csv_path)];
    if sub.get_flag("svg") {
        let chart = out_dir.join("decomposition.svg");
        let to_points = |s: &eclf_core::series::MonthlySeries| -> Vec<(f64, f64)> {
            s.values()
                .iter()
                .enumerate()
                .map(|(i, v)| (i as f64, *v))
                .collect()
        };
        let panels = [
            ("observed", to_points(&decomposition.source)),
            ("seasonal", to_points(&decomposition.seasonal)),
            ("trend", to_points(&decomposition.trend)),
            ("remainder", to_points(&decomposition.remainder)),
        ];
        let panels: Vec<svg::Panel> = panels
            .iter()
            .map(|(title, points)| svg::Panel {
                title,
                series: vec![(*title, points.clone())],
            })
            .collect();
        write_artifact(&chart, &svg::render(&panels, 860, 180))?;
        outputs.push(("chart", chart));
    }

    let output_refs: Vec<(&str, &Path)> = outputs.iter().map(|(l, p)| (*l, p.as_path())).collect();
    write_manifest(
        out_dir,
        "decompose",
        Some(&settings),
        settings.seed()?,
        &[("dataset", Path::new(&input_path))],
        &output_refs,
        serde_json::json!({ "months": load.len() }),
    )?;
    println!("wrote {}", outputs[0].1.display());
    Ok(())
}

fn cmd_select(sub: &ArgMatches, out_dir: &Path) -> Result<()> {
    let settings = settings_for(sub)?;
    let (input_path, load, features) = load_dataset(sub)?;
    let split = settings.split(load.end().year)?;
    let train_len = split.months_since(load.start());
    anyhow::ensure!(train_len > 0, "split {split} precedes the data");
    let train_load = load.slice(load.start(), split.prev())?;
    let train_features = features.slice_rows(0, train_len as usize)?;

    let decomposition = eclf_core::decompose::stl_decompose(&train_load, &settings.stl()?)?;
    let component = match sub
        .get_one::<String>("component")
        .expect("required")
        .as_str()
    {
        "trend" => Component::Trend,
        _ => Component::Random,
    };
    let (target, tag) = match component {
        Component::Trend => (&decomposition.trend, "select-trend"),
        Component::Random => (&decomposition.remainder, "select-random"),
    };
    let seed = settings.seed()?;
    let selection = eclf_core::featsel::select_component_features(
        &train_features,
        target,
        component,
        settings.get("features.pcc_threshold").parse()?,
        settings.get("features.keep_fraction").parse()?,
        derive_seed(seed, tag),
    )?;

    let json_path = out_dir.join("selection.json");
    write_artifact(&json_path, &(selection.to_json() + "\n"))?;
    write_manifest(
        out_dir,
        "select-features",
        Some(&settings),
        seed,
        &[("dataset", Path::new(&input_path))],
        &[("selection", &json_path)],
        serde_json::json!({ "component": component.to_string(), "split": split.to_string() }),
    )?;
    println!("wrote {}", json_path.display());
    Ok(())
}

fn cmd_forecast(sub: &ArgMatches, out_dir: &Path) -> Result<()> {
    let settings = settings_for(sub)?;
    let (input_path, load, features) = load_dataset(sub)?;
    let split = settings.split(load.end().year)?;
    let cfg = settings.eclf()?;
    let bundle = run_eclf(&load, &features, &cfg, split)?;

    let csv_path = out_dir.join("forecast.csv");
    write_artifact(&csv_path, &bundle.to_csv())?;
    let diag_path = out_dir.join("diagnostics.json");
    write_artifact(
        &diag_path,
        &(serde_json::to_string_pretty(&bundle.diagnostics)? + "\n"),
    )?;

    let mut outputs: Vec<(&str, PathBuf)> =
        vec![("forecast", csv_path), ("diagnostics", diag_path)];
    if sub.get_flag("svg") {
        let chart = out_dir.join("forecast.svg");
        let observed: Vec<(f64, f64)> = load
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| (i as f64, *v))
            .collect();
        let offset = split.months_since(load.start()) as f64;
        let predicted: Vec<(f64, f64)> = bundle
            .y_hat
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| (offset + i as f64, *v))
            .collect();
        let panel = svg::Panel {
            title: "observed vs forecast",
            series: vec![("observed", observed), ("forecast", predicted)],
        };
        write_artifact(&chart, &svg::render(&[panel], 860, 300))?;
        outputs.push(("chart", chart));
    }

    let output_refs: Vec<(&str, &Path)> = outputs.iter().map(|(l, p)| (*l, p.as_path())).collect();
    write_manifest(
        out_dir,
        "forecast",
        Some(&settings),
        cfg.seed,
        &[("dataset", Path::new(&input_path))],
        &output_refs,
        serde_json::json!({
            "split": split.to_string(),
            "variant": cfg.variant.to_string(),
            "horizon": bundle.diagnostics.horizon,
        }),
    )?;
    println!("wrote {}", outputs[0].1.display());
    Ok(())
}

fn cmd_ablate(sub: &ArgMatches, out_dir: &Path) -> Result<()> {
    let settings = settings_for(sub)?;
    let (input_path, load, features) = load_dataset(sub)?;
    let split = settings.split(load.end().year)?;
    let cfg = settings.eclf()?;
    let results = run_ablation(&load, &features, &cfg, split)?;

    let mut csv = String::from("variant,mape\n");
    for (variant, mape, _) in &results {
        csv.push_str(&format!("{variant},{mape:.4}\n"));
    }
    let csv_path = out_dir.join("ablation.csv");
    write_artifact(&csv_path, &csv)?;

    write_manifest(
        out_dir,
        "ablate",
        Some(&settings),
        cfg.seed,
        &[("dataset", Path::new(&input_path))],
        &[("ablation", &csv_path)],
        serde_json::json!({ "split": split.to_string() }),
    )?;
    println!("wrote {}", csv_path.display());
    Ok(())
}

fn cmd_evaluate(sub: &ArgMatches, out_dir: &Path) -> Result<()> {
    let fixtures = sub.get_one::<String>("fixtures").expect("required");
    let reference = sub.get_one::<String>("reference").expect("default");
    let alpha: f64 = sub.get_one::<String>("alpha").expect("default").parse()?;
    let first_month: YearMonth = sub
        .get_one::<String>("first-month")
        .expect("default")
        .parse()?;

    let text = fs::read_to_string(fixtures).with_context(|| format!("reading {fixtures}"))?;
    let table = evalstat::MapeTable::parse_csv(&text, first_month)?;
    let report = evalstat::build_report(&table, reference, alpha)?;

    let json_path = out_dir.join("report.json");
    write_artifact(&json_path, &(report.to_json() + "\n"))?;
    let csv_path = out_dir.join("summary.csv");
    write_artifact(&csv_path, &report.summary_csv(&table))?;

    write_manifest(
        out_dir,
        "evaluate",
        None,
        0,
        &[("fixtures", Path::new(fixtures))],
        &[("report", &json_path), ("summary", &csv_path)],
        serde_json::json!({ "reference": reference, "alpha": alpha }),
    )?;
    println!("wrote {}", csv_path.display());
    Ok(())
}
