//! End-to-end demonstration on the height/weight data: split 444/100, fit
//! forests plus a generator network with reference defaults, predict for
//! four covariate combinations, estimate four joint tail probabilities, run
//! block predictions over the whole test set, and evaluate ACvM/AMSE.
//! All outputs are plot-ready CSV files.

use std::path::{Path, PathBuf};

use jointcast_core::data::load_csv;
use jointcast_core::eval::evaluate;
use jointcast_core::forest::ForestConfig;
use jointcast_core::pipeline::{fit_joint, joint_probability, DependenceKind, MarginalKind};
use jointcast_core::rng::substream;
use jointcast_core::{Dataset64, FitConfig64};

use crate::event::parse_event;
use crate::manifest::{current_argv, Manifest};
use crate::{CliError, CliResult, DemoArgs};

use super::{log, write_csv, write_draws_csv, write_matrix_csv};

const HOWELL1_FIXTURE: &str = include_str!("../../assets/howell1.csv");
const HOWELL1_URL: &str =
    "https://raw.githubusercontent.com/rmcelreath/rethinking/master/data/Howell1.csv";
const N_TEST: usize = 100;

pub fn run(args: &DemoArgs, verbose: u8) -> CliResult<()> {
    if args.target != "height-weight" {
        return Err(CliError::usage(format!(
            "unknown demo target `{}` (available: height-weight)",
            args.target
        )));
    }
    let data_path = obtain_data(args.offline)?;
    let out = |name: &str| format!("{}/{}", args.out_dir, name);
    std::fs::create_dir_all(&args.out_dir)?;

    let full: Dataset64 = load_csv(&data_path, &["height", "weight"], &["age", "male"])?;
    let (train, test) = full.split(N_TEST, args.seed)?;
    log(
        verbose,
        format!("loaded {} rows; training on {}, testing on {}", full.n(), train.n(), test.n()),
    );

    let cfg = FitConfig64 {
        forest: ForestConfig {
            n_trees: args.n_trees,
            ..ForestConfig::default()
        },
        gmmn_epochs: args.epochs,
        seed: args.seed,
        ..FitConfig64::default()
    };
    let model = fit_joint(&train, MarginalKind::Forest, DependenceKind::Gmmn, &cfg)?;
    let model_path = out("model.json");
    model.save(&model_path)?;

    // per-epoch training loss, plot-ready
    if let jointcast_core::pipeline::DependenceModel::Gmmn(net) = &model.dependence {
        let rows: Vec<Vec<String>> = net
            .training_log()
            .iter()
            .enumerate()
            .map(|(e, l)| vec![format!("{}", e + 1), format!("{l}")])
            .collect();
        write_csv(&out("training_loss.csv"), &["epoch", "loss"], &rows)?;
    }

    // four covariate combinations and their tail-probability queries
    let cases: [(&str, f64, f64, &str); 4] = [
        ("age6_male1", 6.0, 1.0, "d1>116,d2<21"),
        ("age10_male0", 10.0, 0.0, "d1>116,d2<21"),
        ("age43_male1", 43.0, 1.0, "d1<158,d2>46"),
        ("age67_male0", 67.0, 0.0, "d1<158,d2>46"),
    ];
    let mut prob_rows = Vec::new();
    let mut printed = Vec::new();
    for (i, (name, age, male, event_text)) in cases.iter().enumerate() {
        let z = [*age, *male];
        let mut rng = substream(args.seed, 0x500 + i as u64);
        let sample = model.predict_distribution(&z, args.n_gen, &mut rng)?;
        write_draws_csv(&out(&format!("pred_{name}.csv")), std::slice::from_ref(&sample), false)?;
        let event = parse_event(event_text, &model.schema.response_names)?;
        let p = joint_probability(&sample, &event)?;
        let se = (p * (1.0 - p) / args.n_gen as f64).sqrt();
        prob_rows.push(vec![
            format!("age={age},male={male}"),
            event_text.to_string(),
            format!("{p}"),
            format!("{se}"),
        ]);
        printed.push(p);
        println!("P({event_text} | age={age}, male={male}) = {p}");
    }
    write_csv(
        &out("probabilities.csv"),
        &["covariate", "event", "probability", "standard_error"],
        &prob_rows,
    )?;

    // block predictions over all test covariates for 1, 2, and 5 draws each
    write_matrix_csv(&out("test_scatter.csv"), &["height", "weight"], test.responses())?;
    for (i, n_each) in [1usize, 2, 5].into_iter().enumerate() {
        let mut rng = substream(args.seed, 0x600 + i as u64);
        let samples = model.batch_predict(test.covariates(), n_each, &mut rng)?;
        write_draws_csv(&out(&format!("batch_pred_{n_each}.csv")), &samples, true)?;
    }

    // model assessment
    let report = evaluate(&model, &test, args.n_rep, args.n_gen, args.seed)?;
    write_csv(
        &out("eval_summary.csv"),
        &["model", "acvm", "amse", "n_rep", "n_gen", "n_tst", "seed"],
        &[vec![
            model.dependence_label(),
            format!("{}", report.acvm),
            format!("{}", report.amse),
            format!("{}", report.n_rep),
            format!("{}", report.n_gen),
            format!("{}", report.n_tst),
            format!("{}", args.seed),
        ]],
    )?;
    println!("ACvM = {}", report.acvm);
    println!("AMSE = {}", report.amse);

    let outputs: Vec<String> = vec![
        model_path.clone(),
        out("training_loss.csv"),
        out("probabilities.csv"),
        out("test_scatter.csv"),
        out("batch_pred_1.csv"),
        out("batch_pred_2.csv"),
        out("batch_pred_5.csv"),
        out("eval_summary.csv"),
    ];
    let output_refs: Vec<&str> = outputs.iter().map(String::as_str).collect();
    Manifest::new("demo", current_argv(), args.seed)
        .with_outputs(&output_refs)
        .with_info(serde_json::json!({
            "n_trn": train.n(),
            "n_tst": test.n(),
            "probabilities": printed,
            "acvm": report.acvm,
            "amse": report.amse,
            "offline": args.offline,
        }))
        .write(Path::new(&out("manifest.json")))?;
    log(verbose, format!("demo outputs in {}", args.out_dir));
    Ok(())
}

/// Locate the demo data: cached download, fresh download, or the bundled
/// fixture with `--offline`. Downloads are normalized to the comma-delimited
/// form before caching.
fn obtain_data(offline: bool) -> CliResult<PathBuf> {
    let cache_dir = std::env::var("JOINTCAST_CACHE")
        .map(PathBuf::from)
        .unwrap_or_else(|_| PathBuf::from(".jointcast-cache"));
    std::fs::create_dir_all(&cache_dir)?;
    let cached = cache_dir.join("howell1.csv");
    if offline {
        // the fixture ships with the binary; write it out so the run is
        // reproducible from the manifest alone
        std::fs::write(&cached, HOWELL1_FIXTURE)?;
        return Ok(cached);
    }
    if cached.exists() {
        return Ok(cached);
    }
    let raw = download(HOWELL1_URL).map_err(|e| {
        CliError::Runtime(anyhow::anyhow!(
            "could not download the height/weight data ({e}); rerun with --offline \
             to use the bundled fixture"
        ))
    })?;
    std::fs::write(&cached, normalize_csv(&raw))?;
    Ok(cached)
}

fn download(url: &str) -> anyhow::Result<String> {
    let output = std::process::Command::new("curl")
        .args(["-fsSL", "--max-time", "60", url])
        .output()?;
    if !output.status.success() {
        anyhow::bail!("curl exited with {}", output.status);
    }
    Ok(String::from_utf8(output.stdout)?)
}

/// The upstream file is semicolon-delimited with quoted headers.
fn normalize_csv(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for line in raw.lines() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line
            .split(';')
            .map(|c| c.trim().trim_matches('"'))
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::normalize_csv;

    #[test]
    fn normalizes_semicolons_and_quotes() {
        let raw = "\"height\";\"weight\"\r\n151.765;47.8\n";
        assert_eq!(normalize_csv(raw), "height,weight\n151.765,47.8\n");
    }
}
