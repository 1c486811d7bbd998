//! On-disk problem bundle: a directory of plain-text files.

use std::path::Path;

use super::SylvesterProblem;
use crate::error::{Error, Result};
use crate::matcore::{BlockPartition, DenseMatrix};
use crate::network::Network;
use crate::penalty::PenaltySpec;

/// Files every bundle carries. `X_star.mat` is written alongside when a
/// planted solution is known.
pub const BUNDLE_FILES: [&str; 6] = ["A.mat", "B.mat", "C.mat", "partition.txt", "graph.txt", "penalty.txt"];

const X_STAR_FILE: &str = "X_star.mat";

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_bundle(dir: impl AsRef<Path>, prob: &SylvesterProblem, x_star: Option<&DenseMatrix>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    prob.a().write_file(dir.join("A.mat"))?;
    prob.b().write_file(dir.join("B.mat"))?;
    prob.c().write_file(dir.join("C.mat"))?;
    write(&dir.join("partition.txt"), &format!("{}\n", prob.partition().to_line()))?;
    write(&dir.join("graph.txt"), &prob.network().to_text())?;
    write(&dir.join("penalty.txt"), &format!("{}\n", prob.penalty().to_line()))?;
    if let Some(x) = x_star {
        x.write_file(dir.join(X_STAR_FILE))?;
    }
    Ok(())
}

/// Reads a bundle, returning the problem and the planted solution if present.
pub fn read_bundle(dir: impl AsRef<Path>) -> Result<(SylvesterProblem, Option<DenseMatrix>)> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::Validation(format!("{} is not a problem bundle directory", dir.display())));
    }
    let a = DenseMatrix::read_file(dir.join("A.mat"))?;
    let b = DenseMatrix::read_file(dir.join("B.mat"))?;
    let c = DenseMatrix::read_file(dir.join("C.mat"))?;
    let part_path = dir.join("partition.txt");
    let partition = BlockPartition::parse_line(read(&part_path)?.trim(), &part_path.display().to_string())?;
    let network = Network::read_file(dir.join("graph.txt"))?;
    let pen_path = dir.join("penalty.txt");
    let penalty = if pen_path.exists() {
        PenaltySpec::parse_line(read(&pen_path)?.trim(), &pen_path.display().to_string())?
    } else {
        PenaltySpec::None
    };
    let x_path = dir.join(X_STAR_FILE);
    let x_star = if x_path.exists() { Some(DenseMatrix::read_file(&x_path)?) } else { None };
    let prob = SylvesterProblem::new(a, b, c, partition, network, penalty)?;
    Ok((prob, x_star))
}
