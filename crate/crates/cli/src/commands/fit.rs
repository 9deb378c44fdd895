use jointcast_core::data::load_csv;
use jointcast_core::forest::ForestConfig;
use jointcast_core::pipeline::{fit_joint, DependenceKind, MarginalKind};
use jointcast_core::{Dataset64, FitConfig64};

use crate::manifest::{current_argv, Manifest};
use crate::{CliError, CliResult, FitArgs};

use super::{log, parse_arch, write_matrix_csv};

pub fn run(args: &FitArgs, verbose: u8) -> CliResult<()> {
    let (model, info) = fit_from_args(args, verbose)?;
    model.save(&args.out)?;
    Manifest::new("fit", current_argv(), args.seed)
        .with_outputs(&[&args.out])
        .with_info(info)
        .write_next_to(&args.out)?;
    log(verbose, format!("model written to {}", args.out));
    Ok(())
}

pub fn fit_from_args(
    args: &FitArgs,
    verbose: u8,
) -> CliResult<(jointcast_core::JointModel64, serde_json::Value)> {
    if args.responses.is_empty() || args.covariates.is_empty() {
        return Err(CliError::usage("--responses and --covariates must be non-empty"));
    }
    let marginal: MarginalKind = args
        .marginal
        .parse()
        .map_err(|e| CliError::usage(format!("{e}")))?;
    let dependence: DependenceKind = args
        .dependence
        .parse()
        .map_err(|e| CliError::usage(format!("{e}")))?;
    let (layers, width) = parse_arch(&args.arch)?;
    if args.epochs == 0 && matches!(dependence, DependenceKind::Gmmn) {
        return Err(CliError::usage("--epochs must be positive for gmmn"));
    }
    if args.n_trees == 0 {
        return Err(CliError::usage("--n-trees must be positive"));
    }
    if args.bandwidths.iter().any(|&h| h <= 0.0) {
        return Err(CliError::usage("--bandwidths must be positive"));
    }
    if !(0.0..1.0).contains(&args.dropout) {
        return Err(CliError::usage("--dropout must lie in [0,1)"));
    }

    let response_refs: Vec<&str> = args.responses.iter().map(String::as_str).collect();
    let covariate_refs: Vec<&str> = args.covariates.iter().map(String::as_str).collect();
    let full: Dataset64 = load_csv(&args.data, &response_refs, &covariate_refs).map_err(|e| {
        match e {
            jointcast_core::Error::MissingColumn(_) => CliError::usage(format!("{e}")),
            other => CliError::Runtime(anyhow::Error::new(other)),
        }
    })?;
    if full.dropped_rows() > 0 {
        eprintln!(
            "warning: dropped {} rows with missing or unparseable cells",
            full.dropped_rows()
        );
    }

    let (train, test) = match args.n_test {
        Some(n_test) => {
            let (tr, te) = full.split(n_test, args.seed)?;
            (tr, Some(te))
        }
        None => (full, None),
    };
    if let (Some(test), Some(path)) = (&test, &args.test_out) {
        let header: Vec<&str> = args
            .responses
            .iter()
            .chain(args.covariates.iter())
            .map(String::as_str)
            .collect();
        let mut joined = jointcast_core::Matrix64::zeros(test.n(), header.len());
        for i in 0..test.n() {
            for (j, _) in args.responses.iter().enumerate() {
                joined[(i, j)] = test.responses()[(i, j)];
            }
            for (j, _) in args.covariates.iter().enumerate() {
                joined[(i, args.responses.len() + j)] = test.covariates()[(i, j)];
            }
        }
        write_matrix_csv(path, &header, &joined)?;
    }

    log(
        verbose,
        format!(
            "fitting {marginal}+{dependence} on {} rows ({} responses, {} covariates)",
            train.n(),
            train.d(),
            train.p()
        ),
    );
    let cfg = FitConfig64 {
        forest: ForestConfig {
            n_trees: args.n_trees,
            mtry: args.mtry,
            min_node_size: args.min_node_size,
            seed: 0, // per-dimension seeds are derived from the master seed
        },
        gmmn_hidden: vec![width; layers],
        gmmn_epochs: args.epochs,
        gmmn_batch: args.batch_size,
        gmmn_learning_rate: args.learning_rate,
        gmmn_dropout: args.dropout,
        gmmn_batch_norm: !args.no_batch_norm,
        bandwidths: args.bandwidths.clone(),
        seed: args.seed,
    };
    let model = fit_joint(&train, marginal, dependence, &cfg)?;
    let info = serde_json::json!({
        "n_trn": train.n(),
        "n_tst": test.as_ref().map(|t| t.n()),
        "d": model.d(),
        "p": model.p(),
        "marginal": format!("{marginal}"),
        "dependence": model.dependence_label(),
        "model_id": model.model_id(),
    });
    Ok((model, info))
}
