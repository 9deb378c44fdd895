use jointcast_core::pipeline::joint_probability;
use jointcast_core::rng::stream;

use crate::event::parse_event;
use crate::{CliError, CliResult, ProbArgs};

use super::{load_model, parse_z_pairs};

pub fn run(args: &ProbArgs, _verbose: u8) -> CliResult<()> {
    if args.n_gen == 0 {
        return Err(CliError::usage("--n-gen must be positive"));
    }
    let model = load_model(&args.model)?;
    let event = parse_event(&args.event, &model.schema.response_names)?;
    if event.is_empty() {
        eprintln!("warning: empty event is vacuously certain");
    }
    let pairs = parse_z_pairs(&args.z)?;
    let row = model
        .encode_covariates(&pairs)
        .map_err(|e| CliError::usage(format!("{e}")))?;
    let mut rng = stream(args.seed);
    let sample = model.predict_distribution(&row, args.n_gen, &mut rng)?;
    let p = joint_probability(&sample, &event)?;
    let se = (p * (1.0 - p) / args.n_gen as f64).sqrt();
    println!("probability: {p}");
    println!("standard_error: {se}");
    Ok(())
}
