//! Diagnostics CSV (fixed header, pinned float format, `#` comment trailer)
//! and a minimal SVG plot of `log V_sigma`.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use lyapdecay_core::lyapunov::DiagnosticsRecord;

pub const CSV_HEADER: [&str; 12] = [
    "t",
    "E",
    "D",
    "mass",
    "kinetic_L2",
    "rho_dist_L2",
    "u_L2",
    "V_sigma",
    "W_sigma",
    "cross_term",
    "rho_bound_ok",
    "ineq_39_ok",
];

/// Shortest decimal that round-trips to the same `f64`, in scientific
/// notation. Negative zero is written as `0e0`.
pub fn format_float(v: f64) -> String {
    format!("{:e}", v + 0.0)
}

fn record_fields(r: &DiagnosticsRecord) -> [String; 12] {
    [
        format_float(r.t),
        format_float(r.energy),
        format_float(r.dissipation),
        format_float(r.mass),
        format_float(r.kinetic_l2),
        format_float(r.rho_dist_l2),
        format_float(r.u_l2),
        format_float(r.v_sigma),
        format_float(r.w_sigma),
        format_float(r.cross_term),
        r.rho_bound_ok.to_string(),
        r.decay_ineq_ok.to_string(),
    ]
}

/// Header plus one row per record.
pub fn csv_payload(records: &[DiagnosticsRecord]) -> io::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record(record_fields(r))?;
    }
    w.into_inner().map_err(|e| e.into_error())
}

/// Payload followed by `# ` comment lines.
pub fn write_csv(path: &Path, records: &[DiagnosticsRecord], trailer: &[String]) -> io::Result<()> {
    let mut out = csv_payload(records)?;
    for line in trailer {
        writeln!(out, "# {line}")?;
    }
    std::fs::write(path, out)
}

/// Reads the records back from a diagnostics CSV, skipping comment lines.
pub fn read_csv(path: &Path) -> Result<Vec<DiagnosticsRecord>, String> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let header = rdr.headers().map_err(|e| e.to_string())?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(format!("{}: unexpected header {:?}", path.display(), header.iter().collect::<Vec<_>>()));
    }
    let mut records = Vec::new();
    for (k, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| e.to_string())?;
        let line = k + 2;
        let num = |i: usize| -> Result<f64, String> {
            row[i]
                .parse::<f64>()
                .map_err(|_| format!("row {line}: column {} is not a number: {:?}", CSV_HEADER[i], &row[i]))
        };
        let flag = |i: usize| -> Result<bool, String> {
            row[i]
                .parse::<bool>()
                .map_err(|_| format!("row {line}: column {} is not a boolean: {:?}", CSV_HEADER[i], &row[i]))
        };
        records.push(DiagnosticsRecord {
            t: num(0)?,
            energy: num(1)?,
            dissipation: num(2)?,
            mass: num(3)?,
            kinetic_l2: num(4)?,
            rho_dist_l2: num(5)?,
            u_l2: num(6)?,
            v_sigma: num(7)?,
            w_sigma: num(8)?,
            cross_term: num(9)?,
            rho_bound_ok: flag(10)?,
            decay_ineq_ok: flag(11)?,
        });
    }
    Ok(records)
}

/// Line plot of `log10 V_sigma` against `t`; records with `V_sigma <= 0`
/// are skipped.
pub fn svg_log_plot(records: &[DiagnosticsRecord]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 60.0;
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.v_sigma > 0.0)
        .map(|r| (r.t, r.v_sigma.log10()))
        .collect();
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{M} {M} V{b} H{r}" fill="none" stroke="black"/>"#,
        b = H - M,
        r = W - M
    );
    if pts.is_empty() {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">V_sigma is zero</text>"#, W / 2.0, H / 2.0);
        s.push_str("</svg>\n");
        return s;
    }
    let (t0, t1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (y0, y1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let (y0, y1) = (y0.floor(), y1.ceil().max(y0.floor() + 1.0));
    let tspan = if t1 > t0 { t1 - t0 } else { 1.0 };
    let px = |t: f64| M + (t - t0) / tspan * (W - 2.0 * M);
    let py = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
    let poly: Vec<String> = pts.iter().map(|&(t, y)| format!("{:.2},{:.2}", px(t), py(y))).collect();
    let _ = writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#,
        poly.join(" ")
    );
    let mut decade = y0;
    while decade <= y1 {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" font-size="11" text-anchor="end">1e{}</text>"#,
            M - 6.0,
            py(decade) + 4.0,
            decade as i64
        );
        decade += ((y1 - y0) / 8.0).ceil().max(1.0);
    }
    for (t, anchor) in [(t0, "start"), (t1, "end")] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" font-size="11" text-anchor="{anchor}">t = {t}</text>"#,
            px(t),
            H - M + 16.0
        );
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">V_sigma (log scale)</text>"#, W / 2.0, M / 2.0);
    s.push_str("</svg>\n");
    s
}
