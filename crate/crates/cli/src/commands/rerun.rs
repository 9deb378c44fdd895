use std::path::Path;

use clap::Parser;

use crate::manifest::Manifest;
use crate::{Cli, CliError, CliResult, Command, RerunArgs};

/// Re-execute the command recorded in a manifest; with unchanged inputs the
/// outputs are byte-identical.
pub fn run(args: &RerunArgs, verbose: u8) -> CliResult<()> {
    let manifest = Manifest::read(Path::new(&args.manifest))?;
    if manifest.tool != "jointcast" {
        return Err(CliError::usage(format!(
            "manifest was written by `{}`, not jointcast",
            manifest.tool
        )));
    }
    let mut argv = vec!["jointcast".to_string()];
    argv.extend(manifest.argv.iter().cloned());
    let cli = Cli::try_parse_from(&argv)
        .map_err(|e| CliError::usage(format!("manifest argv does not parse: {e}")))?;
    if matches!(cli.command, Command::Rerun(_)) {
        return Err(CliError::usage("refusing to rerun a rerun manifest"));
    }
    super::log(verbose, format!("re-running: {}", manifest.argv.join(" ")));
    crate::dispatch(cli)
}
