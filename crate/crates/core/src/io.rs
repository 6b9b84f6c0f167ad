//! CSV traces: `t_min,pressure_mmH2O`, decimal, nine significant digits.

use crate::error::{Error, Result};
use crate::model::{PressureTrace, Provenance};
use crate::scenario::FigureData;

pub const TRACE_HEADER: &str = "t_min,pressure_mmH2O";

const SIGNIFICANT_DIGITS: i32 = 9;

/// Plain decimal with nine significant digits and trailing zeros removed.
pub fn format_value(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (SIGNIFICANT_DIGITS - 1 - magnitude).max(0) as usize;
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').trim_end_matches('.').len();
        s.truncate(trimmed);
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

pub fn trace_to_csv(trace: &PressureTrace) -> String {
    let mut out = String::with_capacity(trace.len() * 24);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for (t, p) in trace.iter() {
        out.push_str(&format_value(t));
        out.push(',');
        out.push_str(&format_value(p));
        out.push('\n');
    }
    out
}

pub fn figure_to_csv(figure: &FigureData) -> String {
    let mut out = String::from("t_min");
    for (name, _) in &figure.columns {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (i, t) in figure.times.iter().enumerate() {
        out.push_str(&format_value(*t));
        for (_, values) in &figure.columns {
            out.push(',');
            out.push_str(&format_value(values[i]));
        }
        out.push('\n');
    }
    out
}

/// Parses a two-column trace. Blank lines are ignored.
pub fn parse_trace_csv(text: &str, scenario: &str) -> Result<PressureTrace> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, header)) if header == TRACE_HEADER => {}
        Some((line, header)) => {
            return Err(Error::Format {
                line,
                message: format!("expected header `{TRACE_HEADER}`, found `{header}`"),
            })
        }
        None => {
            return Err(Error::Format {
                line: 1,
                message: "empty trace".into(),
            })
        }
    }
    let mut times = Vec::new();
    let mut pressures = Vec::new();
    for (line, row) in lines {
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(Error::Format {
                line,
                message: format!("expected 2 fields, found {}", fields.len()),
            });
        }
        let parse = |s: &str| -> Result<f64> {
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Format {
                    line,
                    message: format!("not a finite number: `{s}`"),
                }),
            }
        };
        let (t, p) = (parse(fields[0])?, parse(fields[1])?);
        if let Some(&prev) = times.last() {
            if t <= prev {
                return Err(Error::Format {
                    line,
                    message: format!("time {t} does not increase (previous {prev})"),
                });
            }
        }
        times.push(t);
        pressures.push(p);
    }
    if times.is_empty() {
        return Err(Error::Format {
            line: 1,
            message: "trace has no data rows".into(),
        });
    }
    PressureTrace::new(times, pressures, Provenance::External, scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_value(116.79999999999998), "116.8");
        assert_eq!(format_value(244.0), "244");
        assert_eq!(format_value(0.05), "0.05");
        assert_eq!(format_value(1.0 / 3.0), "0.333333333");
        assert_eq!(format_value(123456.789123), "123456.789");
        assert_eq!(format_value(-4.0e-7), "-0.0000004");
        assert_eq!(format_value(-0.0), "0");
    }

    #[test]
    fn round_trip() {
        let trace = PressureTrace::new(
            vec![0.0, 0.05, 0.1],
            vec![244.0, 238.8123456789, 233.7],
            Provenance::Analytic,
            "x",
        )
        .unwrap();
        let csv = trace_to_csv(&trace);
        assert!(csv.starts_with("t_min,pressure_mmH2O\n0,244\n"));
        let back = parse_trace_csv(&csv, "x").unwrap();
        assert_eq!(back.times(), trace.times());
        assert!((back.pressures()[1] - 238.812346).abs() < 1e-9);
    }

    #[test]
    fn rejects_malformed_input() {
        let bad = [
            "time,p\n0,1\n",
            "t_min,pressure_mmH2O\n0,1\n0,2\n",
            "t_min,pressure_mmH2O\n0,abc\n",
            "t_min,pressure_mmH2O\n0,1,2\n",
            "t_min,pressure_mmH2O\n",
            "",
        ];
        for text in bad {
            assert!(matches!(parse_trace_csv(text, "x"), Err(Error::Format { .. })), "{text:?}");
        }
        match parse_trace_csv("t_min,pressure_mmH2O\n0,1\n1,2\n0.5,3\n", "x") {
            Err(Error::Format { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }
}
