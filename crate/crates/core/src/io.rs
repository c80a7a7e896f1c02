//! Text formats: two-column profiles, the checkpoint container holding a
//! whole series, diagnostics CSV and JSON reports.
//!
//! Floats are written with the shortest representation that reads back to
//! the same value, so files round-trip exactly and are byte-identical for
//! identical data.

use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{RadialProfile, TipCap};
use crate::noose::NooseRecord;
use crate::solver::{Diagnostics, FlowSeries, Frame, RunStats, RunStatus};

const PROFILE_MAGIC: &str = "# cbflow profile v1";
const CHECKPOINT_MAGIC: &str = "# cbflow checkpoint v1";

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn cap_json(cap: Option<&TipCap>) -> Result<String> {
    Ok(match cap {
        Some(c) => serde_json::to_string(c)?,
        None => "none".into(),
    })
}

fn parse_cap(text: &str, line: usize) -> Result<Option<TipCap>> {
    let text = text.trim();
    if text == "none" {
        return Ok(None);
    }
    serde_json::from_str(text).map(Some).map_err(|e| parse_err(line, format!("cap: {e}")))
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse().map_err(|_| parse_err(line, format!("bad number {tok:?}")))
}

pub fn write_profile(out: &mut impl Write, profile: &RadialProfile) -> Result<()> {
    writeln!(out, "{PROFILE_MAGIC}")?;
    writeln!(out, "# cap {}", cap_json(profile.cap())?)?;
    for (s, u) in profile.s().iter().zip(profile.u()) {
        writeln!(out, "{s:e} {u:e}")?;
    }
    Ok(())
}

pub fn read_profile(input: impl BufRead) -> Result<RadialProfile> {
    let mut lines = input.lines().enumerate();
    let mut next = || lines.next().map(|(i, l)| l.map(|l| (i + 1, l)).map_err(Error::from)).transpose();
    match next()? {
        Some((_, l)) if l.trim() == PROFILE_MAGIC => {}
        _ => return Err(parse_err(1, "missing profile header")),
    }
    let cap = match next()? {
        Some((n, l)) => match l.strip_prefix("# cap ") {
            Some(rest) => parse_cap(rest, n)?,
            None => return Err(parse_err(n, "missing cap line")),
        },
        None => return Err(parse_err(2, "missing cap line")),
    };
    let (mut s, mut u) = (Vec::new(), Vec::new());
    while let Some((n, l)) = next()? {
        let l = l.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let mut it = l.split_whitespace();
        match (it.next(), it.next(), it.next()) {
            (Some(a), Some(b), None) => {
                s.push(parse_f64(a, n)?);
                u.push(parse_f64(b, n)?);
            }
            _ => return Err(parse_err(n, "expected two columns")),
        }
    }
    RadialProfile::new(s, u, cap)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CheckpointMeta {
    nodes: usize,
    frames: usize,
    status: RunStatus,
    stats: RunStats,
}

/// Writes every frame of a series, with its cap and diagnostics.
pub fn write_checkpoint(out: &mut impl Write, series: &FlowSeries) -> Result<()> {
    let meta = CheckpointMeta {
        nodes: series.grid().len(),
        frames: series.len(),
        status: series.status.clone(),
        stats: series.stats,
    };
    writeln!(out, "{CHECKPOINT_MAGIC}")?;
    writeln!(out, "# meta {}", serde_json::to_string(&meta)?)?;
    writeln!(out, "grid")?;
    for s in series.grid().iter() {
        writeln!(out, "{s:e}")?;
    }
    for f in series.frames() {
        writeln!(out, "frame t={:e} cap={} diag={}", f.t, cap_json(f.cap.as_ref())?, serde_json::to_string(&f.diag)?)?;
        for u in &f.u {
            writeln!(out, "{u:e}")?;
        }
    }
    Ok(())
}

pub fn read_checkpoint(input: impl BufRead) -> Result<FlowSeries> {
    let mut lines = input.lines().enumerate().map(|(i, l)| l.map(|l| (i + 1, l)));
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some(Ok(x)) => Ok(x),
            Some(Err(e)) => Err(e.into()),
            None => Err(parse_err(0, format!("unexpected end of file, expected {what}"))),
        }
    };
    let (n, l) = next("header")?;
    if l.trim() != CHECKPOINT_MAGIC {
        return Err(parse_err(n, "missing checkpoint header"));
    }
    let (n, l) = next("meta line")?;
    let meta: CheckpointMeta = l
        .strip_prefix("# meta ")
        .ok_or_else(|| parse_err(n, "missing meta line"))
        .and_then(|m| serde_json::from_str(m).map_err(|e| parse_err(n, format!("meta: {e}"))))?;
    let (n, l) = next("grid")?;
    if l.trim() != "grid" {
        return Err(parse_err(n, "expected grid block"));
    }
    let values = |count: usize, next: &mut dyn FnMut(&str) -> Result<(usize, String)>| -> Result<Vec<f64>> {
        (0..count)
            .map(|_| {
                let (n, l) = next("value")?;
                parse_f64(l.trim(), n)
            })
            .collect()
    };
    let grid: Arc<[f64]> = values(meta.nodes, &mut next)?.into();
    let mut frames = Vec::with_capacity(meta.frames);
    for _ in 0..meta.frames {
        let (n, l) = next("frame record")?;
        let rest = l.strip_prefix("frame t=").ok_or_else(|| parse_err(n, "expected frame record"))?;
        let (t, rest) = rest.split_once(" cap=").ok_or_else(|| parse_err(n, "frame without cap"))?;
        let (cap, diag) = rest.split_once(" diag=").ok_or_else(|| parse_err(n, "frame without diagnostics"))?;
        let t = parse_f64(t, n)?;
        let cap = parse_cap(cap, n)?;
        let diag: Diagnostics = serde_json::from_str(diag).map_err(|e| parse_err(n, format!("diag: {e}")))?;
        let u = values(meta.nodes, &mut next)?;
        frames.push(Frame { t, u, cap, diag });
    }
    let mut series = FlowSeries::new(grid, frames, meta.status)?;
    series.stats = meta.stats;
    Ok(series)
}

/// One row per frame: `t, supK, infK, vol_total, vol_bulb, width, noose_rho,
/// noose_len, noose_area`; absent values are empty cells.
pub fn write_diagnostics_csv(out: impl Write, series: &FlowSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "supK", "infK", "vol_total", "vol_bulb", "width", "noose_rho", "noose_len", "noose_area"])?;
    let cell = |x: Option<f64>| x.map_or_else(String::new, |v| format!("{v:e}"));
    for f in series.frames() {
        let d = &f.diag;
        let n = d.noose;
        w.write_record([
            format!("{:e}", f.t),
            cell(d.sup_k),
            cell(d.inf_k),
            cell(d.vol_total),
            cell(d.vol_bulb),
            cell(d.width),
            cell(n.map(|n| n.rho)),
            cell(n.map(|n| n.length)),
            cell(n.map(|n| n.area)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Loop track: `t, rho, length, area` per accepted step.
pub fn write_track_csv(out: impl Write, track: &[NooseRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "rho", "length", "area"])?;
    for r in track {
        w.write_record([r.t, r.rho, r.length, r.area].map(|v| format!("{v:e}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(out: &mut impl Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::Barrier;
    use crate::solver::NooseSample;

    fn sphere_profile() -> RadialProfile {
        let b = Barrier::unit_bulb(0.0);
        let grid: Arc<[f64]> = (0..=40).map(|i| -2.0 + 0.1 * i as f64).collect();
        RadialProfile::from_fn(grid, Some(TipCap { model: b, t: 0.0 }), |s| b.eval(0.0, s).unwrap()).unwrap()
    }

    #[test]
    fn profile_round_trip_is_exact() {
        let p = sphere_profile();
        let mut buf = Vec::new();
        write_profile(&mut buf, &p).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# cbflow profile v1\n# cap {"));
        let q = read_profile(buf.as_slice()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn profile_errors_carry_line_numbers() {
        let bad = "# cbflow profile v1\n# cap none\n0 1\n1 x\n";
        assert_eq!(read_profile(bad.as_bytes()).unwrap_err(), Error::Parse { line: 4, msg: "bad number \"x\"".into() });
        assert!(matches!(read_profile("0 1\n".as_bytes()), Err(Error::Parse { line: 1, .. })));
        let three = "# cbflow profile v1\n# cap none\n0 1 2\n";
        assert!(matches!(read_profile(three.as_bytes()), Err(Error::Parse { line: 3, .. })));
    }

    fn small_series() -> FlowSeries {
        let grid: Arc<[f64]> = (0..=20).map(|i| -1.0 + 0.1 * i as f64).collect();
        let mut s = FlowSeries::from_fn(grid, &[0.0, 0.25, 0.5], |t, s| -s + 0.1 * t).unwrap();
        s.frames_mut()[1].diag.noose = Some(NooseSample { rho: 0.3, length: 1.5, area: 2.0 });
        s.frames_mut()[2].cap = Some(TipCap::flat(1.0, -0.95));
        s.stats.steps = 7;
        s
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let s = small_series();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &s).unwrap();
        let back = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(s, back);
        assert_eq!(back.stats.steps, 7);
        let mut again = Vec::new();
        write_checkpoint(&mut again, &back).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn truncated_checkpoint_is_rejected() {
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &small_series()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(30).map(|l| format!("{l}\n")).collect();
        assert!(matches!(read_checkpoint(cut.as_bytes()), Err(Error::Parse { .. })));
    }

    #[test]
    fn diagnostics_columns() {
        let mut buf = Vec::new();
        write_diagnostics_csv(&mut buf, &small_series()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,supK,infK,vol_total,vol_bulb,width,noose_rho,noose_len,noose_area");
        let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.len() == 9));
        assert_eq!(rows[0][6], "");
        assert_eq!(rows[1][6], "3e-1");
        assert_eq!(rows[0][4], "");
    }
}
