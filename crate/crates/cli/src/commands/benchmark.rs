use jointcast_core::eval::{benchmark_copula_learning, BenchmarkConfig};

use crate::manifest::{current_argv, Manifest};
use crate::{CliError, CliResult, BenchmarkArgs};

use super::{log, parse_arch, write_csv};

pub fn run(args: &BenchmarkArgs, verbose: u8) -> CliResult<()> {
    let family = args
        .family
        .parse()
        .map_err(|e| CliError::usage(format!("{e}")))?;
    if args.dim < 2 {
        return Err(CliError::usage("--dim must be at least 2"));
    }
    if !(args.tau > 0.0 && args.tau < 1.0) {
        return Err(CliError::usage(format!(
            "--tau {} outside the supported range (0,1)",
            args.tau
        )));
    }
    if args.reps == 0 || args.n_gen == 0 || args.epochs == 0 || args.n_trn < 2 {
        return Err(CliError::usage("--reps, --n-gen, --epochs, --n-trn must be positive"));
    }
    let architectures = args
        .architectures
        .iter()
        .map(|a| parse_arch(a))
        .collect::<CliResult<Vec<_>>>()?;

    let cfg = BenchmarkConfig {
        family,
        dim: args.dim,
        tau: args.tau,
        n_trn: args.n_trn,
        architectures,
        epochs: args.epochs,
        reps: args.reps,
        n_gen: args.n_gen,
        batch_size: Some(args.batch_size.min(args.n_trn)),
        mc_cdf_samples: args.mc_cdf_samples,
        seed: args.seed,
    };
    log(
        verbose,
        format!(
            "benchmark: {} d={} tau={} n_trn={} epochs={} B={}",
            args.family, args.dim, args.tau, args.n_trn, args.epochs, args.reps
        ),
    );
    let rows = benchmark_copula_learning(&cfg)?;
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.architecture.clone(),
                format!("{}", r.replication + 1),
                format!("{}", r.cvm),
                r.truth_cdf_se.map(|s| format!("{s}")).unwrap_or_default(),
            ]
        })
        .collect();
    write_csv(
        &args.out,
        &["architecture", "replication", "cvm", "truth_cdf_se"],
        &csv_rows,
    )?;
    Manifest::new("benchmark", current_argv(), args.seed)
        .with_outputs(&[&args.out])
        .write_next_to(&args.out)?;
    log(verbose, format!("benchmark table written to {}", args.out));
    Ok(())
}
