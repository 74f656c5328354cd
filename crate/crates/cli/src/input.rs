use std::io::Read;
use std::path::Path;

use mmt_core::fixtures::Fixture;
use mmt_core::io::decomposition_from_json;
use mmt_core::Decomposition64;

use crate::CliError;

/// Loads a decomposition from a JSON file, from stdin (`-`), or from a
/// fixture name such as `strassen` or `naive(2,3,2)` when no file of that
/// name exists.
pub fn load_decomposition(arg: &str) -> Result<Decomposition64, CliError> {
    let text = if arg == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        s
    } else if Path::new(arg).exists() {
        std::fs::read_to_string(arg)?
    } else {
        return arg
            .parse::<Fixture>()
            .map(|f| f.build())
            .map_err(|_| CliError::Parse(format!("'{arg}' is neither a file nor a fixture name")));
    };
    decomposition_from_json(&text).map_err(|e| CliError::Parse(format!("{arg}: {e}")))
}
