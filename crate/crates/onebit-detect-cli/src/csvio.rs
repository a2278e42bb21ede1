//! CSV rendering for result curves.
//!
//! Schemas are fixed: ROC files carry the header
//! `threshold,pfa_emp,pfa_emp_se,pd_emp,pd_emp_se,pfa_theory,pd_theory` and
//! power files `snr_db,pd_emp,pd_emp_se,pd_theory`. Values are decimal text
//! with nine significant digits, rows end in `\n`, files are UTF-8, and a
//! theory column with no defined value (degenerate or non-positive-definite
//! analysis) is spelled `NaN`. Rendering is pure string assembly, so a rerun
//! with the same inputs is byte-identical.

use std::fs;
use std::path::Path;

use onebit_detect::sim::{PowerCurve, RocCurve};

use crate::error::CliError;

/// Header line of ROC and sensitivity CSV files.
pub const ROC_HEADER: &str = "threshold,pfa_emp,pfa_emp_se,pd_emp,pd_emp_se,pfa_theory,pd_theory";

/// Header line of power CSV files.
pub const POWER_HEADER: &str = "snr_db,pd_emp,pd_emp_se,pd_theory";

/// Formats a value as decimal text with nine significant digits.
///
/// Magnitudes between 1e-4 and 1e9 render in plain decimal; anything more
/// extreme keeps exponent notation (still nine significant digits). Zero is
/// `0`, and non-finite values spell out as `NaN`, `inf`, or `-inf`.
pub fn format_sig9(x: f64) -> String {
    if x.is_nan() {
        return String::from("NaN");
    }
    if x.is_infinite() {
        return String::from(if x > 0.0 { "inf" } else { "-inf" });
    }
    if x == 0.0 {
        return String::from("0");
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exponent) = sci.split_once('e').expect("exponent form");
    let exponent: i32 = exponent.parse().expect("numeric exponent");
    if !(-4..=8).contains(&exponent) {
        return sci;
    }
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    debug_assert_eq!(digits.len(), 9);
    let mut out = String::with_capacity(16);
    if x < 0.0 {
        out.push('-');
    }
    if exponent < 0 {
        out.push_str("0.");
        for _ in 0..(-exponent - 1) {
            out.push('0');
        }
        out.push_str(&digits);
    } else {
        let int_len = (exponent + 1) as usize;
        out.push_str(&digits[..int_len]);
        if int_len < digits.len() {
            out.push('.');
            out.push_str(&digits[int_len..]);
        }
    }
    out
}

/// Renders an ROC curve (or a sensitivity curve, same schema) as CSV text.
pub fn roc_csv(curve: &RocCurve) -> String {
    let mut out = String::from(ROC_HEADER);
    out.push('\n');
    for row in &curve.rows {
        let cells = [
            row.threshold,
            row.pfa_emp,
            row.pfa_emp_se,
            row.pd_emp,
            row.pd_emp_se,
            row.pfa_theory,
            row.pd_theory,
        ];
        push_row(&mut out, &cells);
    }
    out
}

/// Renders a power curve as CSV text.
pub fn power_csv(curve: &PowerCurve) -> String {
    let mut out = String::from(POWER_HEADER);
    out.push('\n');
    for row in &curve.rows {
        let cells = [row.snr_db, row.pd_emp, row.pd_emp_se, row.pd_theory];
        push_row(&mut out, &cells);
    }
    out
}

fn push_row(out: &mut String, cells: &[f64]) {
    for (k, cell) in cells.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        out.push_str(&format_sig9(*cell));
    }
    out.push('\n');
}

/// Writes rendered text to a file.
///
/// # Errors
///
/// `Validation` with the path in the message on any IO failure.
pub fn write_text(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use onebit_detect::sim::{PowerRow, RocRow};

    #[test]
    fn sig9_known_strings() {
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(-0.0), "0");
        assert_eq!(format_sig9(1.0), "1.00000000");
        assert_eq!(format_sig9(-7.5), "-7.50000000");
        assert_eq!(format_sig9(0.3), "0.300000000");
        assert_eq!(format_sig9(0.983333333333), "0.983333333");
        assert_eq!(format_sig9(-68.88934208713148), "-68.8893421");
        assert_eq!(format_sig9(123456789.0), "123456789");
        assert_eq!(format_sig9(1234567891.0), "1.23456789e9");
        assert_eq!(format_sig9(0.0001), "0.000100000000");
        assert_eq!(format_sig9(0.00001), "1.00000000e-5");
        assert_eq!(format_sig9(f64::NAN), "NaN");
        assert_eq!(format_sig9(f64::INFINITY), "inf");
        assert_eq!(format_sig9(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn sig9_round_trips_to_nine_digits() {
        // Parsing the rendered text back recovers the value to 1 part in 1e8.
        for &x in &[
            0.512345678912,
            -693.147180559945,
            3.0e-3,
            0.999999999,
            1.0000000049,
        ] {
            let s = format_sig9(x);
            let back: f64 = s.parse().unwrap();
            assert!(
                ((back - x) / x).abs() < 5e-9,
                "{x} -> {s} -> {back}"
            );
        }
    }

    #[test]
    fn empty_roc_curve_renders_header_only() {
        let curve = RocCurve {
            rows: vec![],
            auc: 0.0,
        };
        assert_eq!(roc_csv(&curve), format!("{ROC_HEADER}\n"));
    }

    #[test]
    fn rows_render_in_schema_order() {
        let curve = RocCurve {
            rows: vec![RocRow {
                threshold: -1.5,
                pfa_emp: 0.5,
                pfa_emp_se: 0.025,
                pd_emp: 0.75,
                pd_emp_se: 0.0125,
                pfa_theory: 0.5,
                pd_theory: f64::NAN,
            }],
            auc: 0.5,
        };
        let text = roc_csv(&curve);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(ROC_HEADER));
        assert_eq!(
            lines.next(),
            Some("-1.50000000,0.500000000,0.0250000000,0.750000000,0.0125000000,0.500000000,NaN")
        );
        assert_eq!(lines.next(), None);
        assert!(text.ends_with('\n'));

        let power = PowerCurve {
            fixed_pfa: 0.3,
            rows: vec![PowerRow {
                snr_db: -5.0,
                pd_emp: 0.42,
                pd_emp_se: 0.01,
                pd_theory: 0.4,
            }],
        };
        let text = power_csv(&power);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(POWER_HEADER));
        assert_eq!(
            lines.next(),
            Some("-5.00000000,0.420000000,0.0100000000,0.400000000")
        );
    }
}
