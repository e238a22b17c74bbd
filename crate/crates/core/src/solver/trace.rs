use std::io::Write;

use super::SolverRun;
use crate::Result;

/// Column header of exported traces.
pub const TRACE_HEADER: &str =
    "iter,f_value,fw_gap,step_size,L_k,gamma_k,inner_checks,cum_inner_checks,elapsed_seconds";

/// Writes one CSV row per trace record, reals with 17 significant digits.
pub fn write_trace_csv<W: Write>(run: &SolverRun, out: &mut W) -> Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    let mut cumulative = 0;
    for r in &run.trace {
        cumulative += r.inner_checks;
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{:.16e}",
            r.k, r.f_value, r.fw_gap, r.alpha, r.l_k, r.gamma_k, r.inner_checks, cumulative, r.elapsed_seconds
        )?;
    }
    Ok(())
}
