//! Numeric formatting and the CSV files written by the driver.
//!
//! Data columns use C's `%.12g`. Values that must survive a round trip
//! (record headers, the manifest) use Rust's shortest round-trip form.

use std::io::{self, BufRead, Write};

use rabi_core::estimator::InfoGainCurve;
use rabi_core::record::Event;
use rabi_core::{AtomState, EventKind, MeasurementRecord, WaitingTimeCurve};

use crate::error::FormatError;

/// `printf("%.*g", precision, x)`.
pub fn fmt_g(x: f64, precision: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let p = precision.max(1);
    let sci = format!("{:.*e}", p - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= p as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (p as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `%.12g`, the format of every numeric data column.
pub fn g12(x: f64) -> String {
    fmt_g(x, 12)
}

/// Shortest decimal string that parses back to the same `f64`.
pub fn round_trip(x: f64) -> String {
    format!("{x:?}")
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn write_comments<W: Write>(w: &mut W, header: &[(String, String)]) -> io::Result<()> {
    for (k, v) in header {
        writeln!(w, "# {k} = {v}")?;
    }
    Ok(())
}

/// Writes a record as `step_index,kind` rows under a comment header. `dt`
/// and `n_steps` are always written first; `extra` lines follow.
pub fn write_record<W: Write>(mut w: W, record: &MeasurementRecord, extra: &[(String, String)]) -> Result<(), FormatError> {
    let mut header = vec![
        ("dt".to_string(), round_trip(record.dt())),
        ("n_steps".to_string(), record.n_steps().to_string()),
        ("duration".to_string(), round_trip(record.duration())),
    ];
    header.extend_from_slice(extra);
    write_comments(&mut w, &header)?;
    let mut out = csv_writer(w);
    out.write_record(["step_index", "kind"])?;
    for e in record.events() {
        out.write_record([e.step.to_string().as_str(), e.kind.as_str()])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a record written by [`write_record`]. Also returns the header
/// key/value pairs.
pub fn read_record<R: BufRead>(r: R) -> Result<(MeasurementRecord, Vec<(String, String)>), FormatError> {
    let mut header = Vec::new();
    let mut rows = Vec::new();
    for line in r.lines() {
        let line = line?;
        if let Some(c) = line.strip_prefix('#') {
            if let Some((k, v)) = c.split_once('=') {
                header.push((k.trim().to_string(), v.trim().to_string()));
            }
        } else if !line.trim().is_empty() {
            rows.push(line);
        }
    }
    let get = |key: &str| {
        header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str()).ok_or(FormatError::MissingHeader(key.to_string()))
    };
    let dt: f64 = get("dt")?.parse().map_err(|_| FormatError::Malformed("dt".into()))?;
    let n_steps: u64 = get("n_steps")?.parse().map_err(|_| FormatError::Malformed("n_steps".into()))?;
    let body = rows.join("\n");
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
    if reader.headers()?.iter().collect::<Vec<_>>() != ["step_index", "kind"] {
        return Err(FormatError::Malformed("column header".into()));
    }
    let mut events = Vec::new();
    for row in reader.records() {
        let row = row?;
        let step = row[0].parse().map_err(|_| FormatError::Malformed(format!("step index {:?}", &row[0])))?;
        let kind = EventKind::parse(&row[1]).ok_or_else(|| FormatError::Malformed(format!("event kind {:?}", &row[1])))?;
        events.push(Event { step, kind });
    }
    Ok((MeasurementRecord::from_events(dt, n_steps, events)?, header))
}

/// `time,<node Ω…>` header, then one row of node probabilities per snapshot.
pub fn write_posterior<W: Write>(w: W, nodes: &[f64], rows: &[(f64, Vec<f64>)]) -> Result<(), FormatError> {
    let mut out = csv_writer(w);
    out.write_record(std::iter::once("time".to_string()).chain(nodes.iter().map(|x| g12(*x))))?;
    for (t, p) in rows {
        out.write_record(std::iter::once(g12(*t)).chain(p.iter().map(|x| g12(*x))))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_info_gain<W: Write>(w: W, curve: &InfoGainCurve) -> Result<(), FormatError> {
    let mut out = csv_writer(w);
    out.write_record(["time", "mean_bits", "stderr_bits"])?;
    for k in 0..curve.time.len() {
        out.write_record([g12(curve.time[k]), g12(curve.mean_bits[k]), g12(curve.stderr_bits[k])])?;
    }
    out.flush()?;
    Ok(())
}

/// Columns `time,n,x,y,z`.
pub fn write_states<W: Write>(w: W, rows: &[(f64, AtomState)]) -> Result<(), FormatError> {
    let mut out = csv_writer(w);
    out.write_record(["time", "n", "x", "y", "z"])?;
    for (t, s) in rows {
        out.write_record([g12(*t), g12(s.n), g12(s.x), g12(s.y), g12(s.z)])?;
    }
    out.flush()?;
    Ok(())
}

/// A time column followed by one named column per series.
pub fn write_columns<W: Write>(w: W, names: &[&str], time: &[f64], series: &[Vec<f64>]) -> Result<(), FormatError> {
    let mut out = csv_writer(w);
    out.write_record(std::iter::once("time").chain(names.iter().copied()))?;
    for (k, t) in time.iter().enumerate() {
        out.write_record(std::iter::once(g12(*t)).chain(series.iter().map(|s| g12(s[k]))))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_wtd<W: Write>(mut w: W, curve: &WaitingTimeCurve, header: &[(String, String)]) -> Result<(), FormatError> {
    let mut header = header.to_vec();
    header.push(("clipped".into(), curve.clipped.to_string()));
    write_comments(&mut w, &header)?;
    let mut out = csv_writer(w);
    out.write_record(["tau", "density"])?;
    for (t, d) in curve.tau.iter().zip(&curve.density) {
        out.write_record([g12(*t), g12(*d)])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        let cases: &[(f64, &str)] = &[
            (0.0, "0"),
            (1.0, "1"),
            (0.1, "0.1"),
            (1.0 / 3.0, "0.333333333333"),
            (16.0 / 33.0, "0.484848484848"),
            (123456789012.0, "123456789012"),
            (1234567890123.0, "1.23456789012e+12"),
            (1e-4, "0.0001"),
            (1.5e-5, "1.5e-05"),
            (-2.5, "-2.5"),
            (1e100, "1e+100"),
            (9.9999999999999e-5, "0.0001"),
            (999999999999.5, "1e+12"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt_g(*x, 12), *want, "{x}");
        }
        assert_eq!(fmt_g(f64::NAN, 12), "nan");
        assert_eq!(fmt_g(1234.5678, 3), "1.23e+03");
    }

    #[test]
    fn record_round_trip() {
        let rec = MeasurementRecord::from_events(
            0.1 + 0.2,
            1000,
            vec![
                Event { step: 3, kind: EventKind::Detection },
                Event { step: 40, kind: EventKind::Avalanche },
                Event { step: 999, kind: EventKind::DarkAvalanche },
            ],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_record(&mut buf, &rec, &[("omega_true".into(), "4.0".into())]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(!text.contains('\r'));
        let (back, header) = read_record(buf.as_slice()).unwrap();
        assert_eq!(back, rec);
        assert!(header.contains(&("omega_true".into(), "4.0".into())));
    }

    #[test]
    fn malformed_records_are_rejected() {
        assert!(read_record("step_index,kind\n1,detection\n".as_bytes()).is_err());
        assert!(read_record("# dt = 0.1\n# n_steps = 5\nstep_index,kind\n7,detection\n".as_bytes()).is_err());
        assert!(read_record("# dt = 0.1\n# n_steps = 5\nstep_index,kind\n1,photon\n".as_bytes()).is_err());
    }
}
