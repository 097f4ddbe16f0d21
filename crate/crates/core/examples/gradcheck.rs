//! End-to-end finite-difference check of the full objective on the
//! miniature model.

use futurex::cli;

fn main() -> futurex::Result<()> {
    let report = cli::gradcheck(5, 2, cli::GRADCHECK_STEP, 1e-4)?;
    print!("{}", cli::format_gradcheck(&report));
    Ok(())
}
