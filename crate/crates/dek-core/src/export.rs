//! Delimited text exports. Every file starts with a header line; floats are
//! written in Rust's shortest round-trip form.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{DekError, Result};
use crate::gram::GramMatrix;
use crate::matrix::Matrix;
use crate::pairing::PairBatch;
use crate::ranking::PrCurve;

fn writer(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| DekError::io(path, e))?,
    ))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| DekError::io(path, e))
}

/// `epoch,mean_loss` with 1-based epochs.
pub fn write_loss_history(path: &Path, history: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "epoch,mean_loss").map_err(|e| DekError::io(path, e))?;
    for (epoch, loss) in history.iter().enumerate() {
        writeln!(w, "{},{}", epoch + 1, loss).map_err(|e| DekError::io(path, e))?;
    }
    finish(w, path)
}

/// `row,col,value` in row-major order.
pub fn write_gram(path: &Path, gram: &GramMatrix) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "row,col,value").map_err(|e| DekError::io(path, e))?;
    for r in 0..gram.rows() {
        for c in 0..gram.cols() {
            writeln!(w, "{r},{c},{}", gram.get(r, c)).map_err(|e| DekError::io(path, e))?;
        }
    }
    finish(w, path)
}

/// `recall,mean_precision` over the fixed grid.
pub fn write_pr_curve(path: &Path, curve: &PrCurve) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "recall,mean_precision").map_err(|e| DekError::io(path, e))?;
    for (r, p) in curve.recall.iter().zip(&curve.mean_precision) {
        writeln!(w, "{r},{p}").map_err(|e| DekError::io(path, e))?;
    }
    finish(w, path)
}

/// `index,c1,..,cn` coordinates for external plotting.
pub fn write_coordinates(path: &Path, coords: &Matrix) -> Result<()> {
    let mut w = writer(path)?;
    let header: Vec<String> = std::iter::once("index".to_string())
        .chain((1..=coords.cols()).map(|i| format!("c{i}")))
        .collect();
    writeln!(w, "{}", header.join(",")).map_err(|e| DekError::io(path, e))?;
    for r in 0..coords.rows() {
        let row: Vec<String> = std::iter::once(r.to_string())
            .chain(coords.row(r).iter().map(|v| v.to_string()))
            .collect();
        writeln!(w, "{}", row.join(",")).map_err(|e| DekError::io(path, e))?;
    }
    finish(w, path)
}

/// `i,j,target` for inspecting a pair batch.
pub fn write_pairs(path: &Path, batch: &PairBatch) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "i,j,target").map_err(|e| DekError::io(path, e))?;
    for ((i, j), t) in batch.iter() {
        writeln!(w, "{i},{j},{t}").map_err(|e| DekError::io(path, e))?;
    }
    finish(w, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairing::make_pairs_full;

    #[test]
    fn loss_history_round_trips_through_text() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("loss.csv");
        let history = vec![0.6931471805599453, 0.25, 0.12345678901234567];
        write_loss_history(&path, &history).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("epoch,mean_loss"));
        for (i, line) in lines.enumerate() {
            let (epoch, loss) = line.split_once(',').unwrap();
            assert_eq!(epoch.parse::<usize>().unwrap(), i + 1);
            assert_eq!(loss.parse::<f64>().unwrap(), history[i], "exact round trip");
        }
    }

    #[test]
    fn gram_export_is_row_major_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gram.csv");
        let g = GramMatrix::new(Matrix::from_vec(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap())
            .unwrap();
        write_gram(&path, &g).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "row,col,value");
        assert_eq!(lines[1], "0,0,0.1");
        assert_eq!(lines[4], "1,1,0.4");
    }

    #[test]
    fn pair_export_lists_every_pair() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.csv");
        let batch = make_pairs_full(&[0, 1]).unwrap();
        write_pairs(&path, &batch).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "i,j,target\n0,1,0\n");
    }
}
