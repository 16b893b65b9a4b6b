//! File formats shared with the command-line front end: signals, trained
//! parameters, training history, and evaluation reports, all as plain CSV
//! with LF line endings. Floats are written with Rust's shortest
//! round-trip formatting, so reading a file back reproduces the exact bits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::bss::EvalReport;
use crate::rnn::{RnnParams, TrainHistory};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("{path}: unexpected header {got:?}, expected {expected:?}")]
    Header {
        path: String,
        got: String,
        expected: String,
    },
    #[error("{path}: inconsistent parameter table: {msg}")]
    BadParams { path: String, msg: String },
}

pub type Result<T> = std::result::Result<T, IoError>;

fn io_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

// ---------------------------------------------------------------------------
// signals: `index,value`
// ---------------------------------------------------------------------------

pub fn write_signal_csv(path: &Path, signal: &[f64]) -> Result<()> {
    let mut out = String::with_capacity(signal.len() * 12 + 16);
    out.push_str("index,value\n");
    for (i, v) in signal.iter().enumerate() {
        let _ = writeln!(out, "{i},{v}");
    }
    write_atomic(path, &out)
}

pub fn read_signal_csv(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "index,value")) => {}
        other => {
            return Err(IoError::Header {
                path: path.display().to_string(),
                got: other.map(|(_, l)| l.to_string()).unwrap_or_default(),
                expected: "index,value".into(),
            })
        }
    }
    let mut values = Vec::new();
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let (idx, val) = line.split_once(',').ok_or_else(|| IoError::Parse {
            path: path.display().to_string(),
            line: lineno + 1,
            msg: "expected two comma-separated fields".into(),
        })?;
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.parse().map_err(|_| IoError::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                msg: format!("bad {what}: {s:?}"),
            })
        };
        let _ = parse(idx, "index")?;
        values.push(parse(val, "value")?);
    }
    Ok(values)
}

// ---------------------------------------------------------------------------
// trained parameters: `name,row,col,value`
// ---------------------------------------------------------------------------

pub fn write_params_csv(path: &Path, params: &RnnParams) -> Result<()> {
    let h = params.hidden;
    let mut out = String::new();
    out.push_str("name,row,col,value\n");
    for (r, v) in params.w_in.iter().enumerate() {
        let _ = writeln!(out, "w_in,{r},0,{v}");
    }
    for r in 0..h {
        for c in 0..h {
            let _ = writeln!(out, "w_rec,{r},{c},{}", params.w_rec[r * h + c]);
        }
    }
    for (r, v) in params.b_h.iter().enumerate() {
        let _ = writeln!(out, "b_h,{r},0,{v}");
    }
    for (c, v) in params.w_out.iter().enumerate() {
        let _ = writeln!(out, "w_out,0,{c},{v}");
    }
    let _ = writeln!(out, "b_out,0,0,{}", params.b_out);
    write_atomic(path, &out)
}

pub fn read_params_csv(path: &Path) -> Result<RnnParams> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let display = path.display().to_string();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "name,row,col,value")) => {}
        other => {
            return Err(IoError::Header {
                path: display,
                got: other.map(|(_, l)| l.to_string()).unwrap_or_default(),
                expected: "name,row,col,value".into(),
            })
        }
    }
    let mut entries: Vec<(String, usize, usize, f64)> = Vec::new();
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(IoError::Parse {
                path: display.clone(),
                line: lineno + 1,
                msg: "expected four comma-separated fields".into(),
            });
        }
        let bad = |msg: String| IoError::Parse {
            path: display.clone(),
            line: lineno + 1,
            msg,
        };
        let row: usize = fields[1]
            .parse()
            .map_err(|_| bad(format!("bad row {:?}", fields[1])))?;
        let col: usize = fields[2]
            .parse()
            .map_err(|_| bad(format!("bad col {:?}", fields[2])))?;
        let value: f64 = fields[3]
            .parse()
            .map_err(|_| bad(format!("bad value {:?}", fields[3])))?;
        entries.push((fields[0].to_string(), row, col, value));
    }
    let count = |name: &str| entries.iter().filter(|e| e.0 == name).count();
    let hidden = count("w_in");
    let bad_params = |msg: String| IoError::BadParams {
        path: display.clone(),
        msg,
    };
    if hidden == 0 {
        return Err(bad_params("no w_in rows".into()));
    }
    if count("w_rec") != hidden * hidden
        || count("b_h") != hidden
        || count("w_out") != hidden
        || count("b_out") != 1
    {
        return Err(bad_params(format!(
            "row counts do not describe a hidden size of {hidden}"
        )));
    }
    let mut params = RnnParams::zeros(hidden);
    for (name, row, col, value) in entries {
        let slot = match name.as_str() {
            "w_in" => params.w_in.get_mut(row),
            "w_rec" => params.w_rec.get_mut(row * hidden + col),
            "b_h" => params.b_h.get_mut(row),
            "w_out" => params.w_out.get_mut(col),
            "b_out" => Some(&mut params.b_out),
            _ => None,
        };
        match slot {
            Some(s) => *s = value,
            None => {
                return Err(bad_params(format!("unexpected entry {name},{row},{col}")));
            }
        }
    }
    Ok(params)
}

// ---------------------------------------------------------------------------
// history: `epoch,train_loss,val_loss`
// ---------------------------------------------------------------------------

pub fn write_history_csv(path: &Path, history: &TrainHistory) -> Result<()> {
    let mut out = String::new();
    out.push_str("epoch,train_loss,val_loss\n");
    for e in &history.epochs {
        let _ = writeln!(out, "{},{},{}", e.epoch, e.train_loss, e.val_loss);
    }
    write_atomic(path, &out)
}

// ---------------------------------------------------------------------------
// eval reports: `loss,snr_in_db,seed,sdr_db,sir_db,runtime_s`
// ---------------------------------------------------------------------------

pub fn write_reports_csv(path: &Path, reports: &[EvalReport]) -> Result<()> {
    let mut out = String::new();
    out.push_str(EvalReport::CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    write_atomic(path, &out)
}

pub fn read_reports_csv(path: &Path) -> Result<Vec<EvalReport>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let display = path.display().to_string();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == EvalReport::CSV_HEADER => {}
        other => {
            return Err(IoError::Header {
                path: display,
                got: other.map(|(_, l)| l.to_string()).unwrap_or_default(),
                expected: EvalReport::CSV_HEADER.into(),
            })
        }
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(IoError::Parse {
                path: display.clone(),
                line: lineno + 1,
                msg: "expected six comma-separated fields".into(),
            });
        }
        let bad = |msg: String| IoError::Parse {
            path: display.clone(),
            line: lineno + 1,
            msg,
        };
        rows.push(EvalReport {
            loss_kind: fields[0].to_string(),
            snr_in_db: fields[1]
                .parse()
                .map_err(|_| bad(format!("bad snr {:?}", fields[1])))?,
            seed: fields[2]
                .parse()
                .map_err(|_| bad(format!("bad seed {:?}", fields[2])))?,
            sdr_db: fields[3]
                .parse()
                .map_err(|_| bad(format!("bad sdr {:?}", fields[3])))?,
            sir_db: fields[4]
                .parse()
                .map_err(|_| bad(format!("bad sir {:?}", fields[4])))?,
            runtime_s: fields[5]
                .parse()
                .map_err(|_| bad(format!("bad runtime {:?}", fields[5])))?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp;
    use rand::SeedableRng;

    #[test]
    fn signal_roundtrip_is_bitwise() {
        let dir = std::env::temp_dir().join(format!("sdropt-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("sig.csv");
        let signal = dsp::gen_uniform_noise(257, 99).unwrap();
        write_signal_csv(&path, &signal).unwrap();
        let back = read_signal_csv(&path).unwrap();
        assert_eq!(back.len(), signal.len());
        for (a, b) in signal.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("index,value\n"));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn params_roundtrip_is_bitwise() {
        let dir = std::env::temp_dir().join(format!("sdropt-io-p-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("params.csv");
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let params = crate::rnn::RnnParams::init(5, &mut rng);
        write_params_csv(&path, &params).unwrap();
        let back = read_params_csv(&path).unwrap();
        assert_eq!(params, back);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn missing_file_reports_path() {
        let err = read_signal_csv(Path::new("/nonexistent/sig.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/sig.csv"));
    }

    #[test]
    fn reports_roundtrip() {
        let dir = std::env::temp_dir().join(format!("sdropt-io-r-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("reports.csv");
        let rows = vec![crate::bss::EvalReport {
            loss_kind: "neg_sdr".into(),
            snr_in_db: -10.0,
            seed: 4,
            sdr_db: 11.25,
            sir_db: 12.5,
            runtime_s: 3.0,
        }];
        write_reports_csv(&path, &rows).unwrap();
        let back = read_reports_csv(&path).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].loss_kind, "neg_sdr");
        assert_eq!(back[0].sdr_db, 11.25);
        std::fs::remove_dir_all(&dir).ok();
    }
}
