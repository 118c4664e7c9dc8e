//! CSV reports. Line one is `# ` followed by a JSON metadata object; column
//! order is fixed.

use std::io::Write;

use serde::Serialize;

use super::campaign::MetricsReport;
use super::round::{RoundRecord, Truth};
use super::sweep::{SweepParameter, SweepRow};
use crate::Result;

pub const RUN_COLUMNS: &str =
    "trial,truth,decision,hamming_d,measured_distance_m,error_m,advance_samples,t_round1,t_reply1,t_round2,t_reply2";

pub const SWEEP_COLUMNS: &str = "value,p_fa,p_m,p_s,n";

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn header<W: Write, M: Serialize>(w: &mut W, meta: &M) -> Result<()> {
    writeln!(w, "# {}", serde_json::to_string(meta)?)?;
    Ok(())
}

pub fn write_run_csv<W: Write>(w: &mut W, report: &MetricsReport, records: &[RoundRecord]) -> Result<()> {
    header(w, report)?;
    writeln!(w, "{RUN_COLUMNS}")?;
    let truth = |t: Truth| match t {
        Truth::H0 => "H0",
        Truth::H1 => "H1",
    };
    for r in records {
        let decision = serde_json::to_value(r.decision)?;
        let error = r.measured_distance_m.map(|d| d - report.config.true_distance_m);
        let t = &r.times;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.trial,
            truth(r.truth),
            decision.as_str().unwrap_or_default(),
            opt(r.hamming_d),
            opt(r.measured_distance_m),
            opt(error),
            if r.attack_trace.injected {
                r.attack_trace.advance_used.to_string()
            } else {
                String::new()
            },
            t.t_round1,
            t.t_reply1,
            t.t_round2,
            t.t_reply2,
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepMeta<'a, C: Serialize> {
    parameter: &'static str,
    base: &'a C,
}

pub fn write_sweep_csv<W: Write, C: Serialize>(
    w: &mut W,
    param: SweepParameter,
    base: &C,
    rows: &[SweepRow],
) -> Result<()> {
    header(
        w,
        &SweepMeta {
            parameter: param.name(),
            base,
        },
    )?;
    writeln!(w, "{SWEEP_COLUMNS}")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.value, opt(r.p_fa), opt(r.p_m), opt(r.p_s), r.n)?;
    }
    Ok(())
}
