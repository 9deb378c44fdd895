use jointcast_core::eval::evaluate;

use crate::manifest::{current_argv, Manifest};
use crate::{CliError, CliResult, EvaluateArgs};

use super::{load_dataset_for_model, load_model, log, write_csv};

pub fn run(args: &EvaluateArgs, verbose: u8) -> CliResult<()> {
    if args.n_rep == 0 || args.n_gen == 0 {
        return Err(CliError::usage("--n-rep and --n-gen must be positive"));
    }
    if !args.label.is_empty() && args.label.len() != args.model.len() {
        return Err(CliError::usage("--label count must match --model count"));
    }

    let mut report_rows: Vec<Vec<String>> = Vec::new();
    let mut summary_rows: Vec<Vec<String>> = Vec::new();
    for (idx, path) in args.model.iter().enumerate() {
        let model = load_model(path)?;
        let label = args
            .label
            .get(idx)
            .cloned()
            .unwrap_or_else(|| model.dependence_label());
        let test = load_dataset_for_model(&model, &args.test)?;
        log(verbose, format!("evaluating `{label}` on {} test rows", test.n()));
        let report = evaluate(&model, &test, args.n_rep, args.n_gen, args.seed)?;
        for (rep, value) in report.per_replication.iter().enumerate() {
            report_rows.push(vec![
                label.clone(),
                "cvm".to_string(),
                format!("{value}"),
                format!("{}", rep + 1),
                format!("{}", args.seed),
            ]);
        }
        report_rows.push(vec![
            label.clone(),
            "acvm".to_string(),
            format!("{}", report.acvm),
            String::new(),
            format!("{}", args.seed),
        ]);
        report_rows.push(vec![
            label.clone(),
            "amse".to_string(),
            format!("{}", report.amse),
            String::new(),
            format!("{}", args.seed),
        ]);
        summary_rows.push(vec![
            label,
            format!("{}", report.acvm),
            format!("{}", report.amse),
            format!("{}", report.n_rep),
            format!("{}", report.n_gen),
            format!("{}", report.n_tst),
            format!("{}", args.seed),
        ]);
    }

    let report_path = format!("{}/eval_report.csv", args.out_dir);
    let summary_path = format!("{}/eval_summary.csv", args.out_dir);
    write_csv(
        &report_path,
        &["model", "metric", "value", "replication", "seed"],
        &report_rows,
    )?;
    write_csv(
        &summary_path,
        &["model", "acvm", "amse", "n_rep", "n_gen", "n_tst", "seed"],
        &summary_rows,
    )?;
    Manifest::new("evaluate", current_argv(), args.seed)
        .with_outputs(&[&report_path, &summary_path])
        .write(std::path::Path::new(&format!("{}/manifest.json", args.out_dir)))?;
    log(verbose, format!("reports written to {}", args.out_dir));
    Ok(())
}
