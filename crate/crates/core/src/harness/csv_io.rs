//! CSV encoding of result rows.

use std::io::{Read, Write};

use crate::error::{Error, Result};

use super::runner::ResultRow;

pub const CSV_HEADER: [&str; 9] =
    ["sweep_axis", "sweep_value", "detector", "pmd", "err", "mean_time_s", "median_time_s", "trials", "seed"];

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.sweep_axis.clone(),
            format_f64(r.sweep_value),
            r.detector.clone(),
            format_f64(r.pmd),
            format_f64(r.err),
            format_f64(r.mean_time_s),
            format_f64(r.median_time_s),
            r.trials.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Config(format!("unexpected CSV header: {}", header.iter().collect::<Vec<_>>().join(","))));
    }
    rd.records()
        .map(|rec| {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec[i]
                    .parse()
                    .map_err(|_| Error::Config(format!("bad number `{}` in column {}", &rec[i], CSV_HEADER[i])))
            };
            let int = |i: usize| -> Result<u64> {
                rec[i]
                    .parse()
                    .map_err(|_| Error::Config(format!("bad integer `{}` in column {}", &rec[i], CSV_HEADER[i])))
            };
            Ok(ResultRow {
                sweep_axis: rec[0].to_string(),
                sweep_value: num(1)?,
                detector: rec[2].to_string(),
                pmd: num(3)?,
                err: num(4)?,
                mean_time_s: num(5)?,
                median_time_s: num(6)?,
                trials: int(7)? as usize,
                seed: int(8)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        let s = format_f64(0.0038);
        let mantissa = s.split('e').next().unwrap().replace(['.', '-'], "");
        assert_eq!(mantissa.len(), 17);
        assert_eq!(s.parse::<f64>().unwrap(), 0.0038);
    }

    #[test]
    fn header_is_checked() {
        assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
