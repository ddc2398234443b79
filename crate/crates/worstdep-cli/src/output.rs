//! Plain-text output formats. Numbers use the shortest decimal that parses
//! back to the same double, so equal runs give equal bytes.

use std::fmt::Write as _;
use worstdep::search::{CurveRow, EvalRecord, GreedyTrace};

pub const RECORDS_HEADER: &str =
    "index,restart,iteration,candidate,structure,pairs,families,taus,thetas,quantile,ci_lower,ci_upper,evaluations";
pub const TRACE_HEADER: &str = "k,pair,family,taus,quantile,ci_lower,ci_upper,accepted,record,candidates,grid_size";
pub const CURVE_HEADER: &str = "family,tau,quantile,ci_lo,ci_hi";
/// Prefix of the last line of a records file whose run failed.
pub const FAILURE_MARKER: &str = "# failed: ";

pub fn num(x: f64) -> String {
    ryu::Buffer::new().format(x).to_owned()
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn opt_int(x: Option<usize>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn pair(p: [usize; 2]) -> String {
    format!("{}-{}", p[0], p[1])
}

fn list<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(";")
}

/// One row per evaluated dependence configuration. A degenerate copula has
/// no parameter and shows `none` in the theta list.
pub fn records_csv(records: &[EvalRecord], failure: Option<&str>) -> String {
    let mut out = String::with_capacity(128 * (records.len() + 1));
    out.push_str(RECORDS_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.index,
            opt_int(r.restart),
            opt_int(r.iteration),
            r.candidate.map(pair).unwrap_or_default(),
            r.structure,
            list(&r.pairs, |p| pair(*p)),
            list(&r.families, |f| f.name().to_owned()),
            list(&r.taus, |t| num(*t)),
            list(&r.thetas, |t| t.map_or_else(|| "none".to_owned(), num)),
            num(r.quantile),
            opt_num(r.ci.map(|c| c.lower)),
            opt_num(r.ci.map(|c| c.upper)),
            r.evaluations,
        );
    }
    if let Some(msg) = failure {
        out.push_str(FAILURE_MARKER);
        out.push_str(&msg.replace(['\n', '\r'], " "));
        out.push('\n');
    }
    out
}

/// Best candidate of every greedy iteration, accepted or not.
pub fn trace_csv(trace: &GreedyTrace) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for s in &trace.iterations {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            s.k,
            pair(s.pair),
            s.family.name(),
            list(&s.taus, |t| num(*t)),
            num(s.quantile),
            opt_num(s.ci.map(|c| c.lower)),
            opt_num(s.ci.map(|c| c.upper)),
            s.accepted,
            s.record,
            s.candidates,
            s.grid_size,
        );
    }
    out
}

pub fn curve_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.family.name(),
            num(r.tau),
            num(r.quantile),
            opt_num(r.ci_lower),
            opt_num(r.ci_upper)
        );
    }
    out
}
