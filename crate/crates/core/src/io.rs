//! CSV and JSON file formats.
//!
//! * `ratings.csv`: `user,item,rating` with 0-based indices and an optional
//!   fourth column `k` for per-cell scales.
//! * `X.csv` / `Y.csv`: one header row naming the covariates, then one
//!   numeric row per user or item.
//! * `draws.csv`: one row per retained draw, one column per parameter.
//!
//! Floats are written with Rust's shortest round-trip formatting so files
//! re-read to identical bits.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::distributions::SupportBase;
use crate::error::{Error, Result};
use crate::model::{Observation, RatingData};
use crate::sampler::PosteriorDraws;

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Format(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

fn parse_field<T: std::str::FromStr>(
    path: &Path,
    rec: &csv::StringRecord,
    col: usize,
    name: &str,
) -> Result<T> {
    let raw = rec.get(col).unwrap_or("");
    raw.parse().map_err(|_| {
        Error::Format(format!(
            "{} line {}: cannot parse {name} {raw:?}",
            path.display(),
            line_of(rec)
        ))
    })
}

// ---------------------------------------------------------------------------
// Ratings
// ---------------------------------------------------------------------------

pub fn ratings_to_csv(data: &RatingData) -> String {
    let with_k = !data.cell_scales().is_empty();
    let mut out = String::from(if with_k { "user,item,rating,k\n" } else { "user,item,rating\n" });
    for o in data.observations() {
        if with_k {
            out.push_str(&format!("{},{},{},{}\n", o.user, o.item, o.rating, data.k_at(o.user, o.item)));
        } else {
            out.push_str(&format!("{},{},{}\n", o.user, o.item, o.rating));
        }
    }
    out
}

pub fn write_ratings(path: &Path, data: &RatingData) -> Result<()> {
    write_atomic(path, ratings_to_csv(data).as_bytes())
}

/// Reads `ratings.csv` for an `n × m` matrix; errors name the offending line.
pub fn read_ratings(path: &Path, n: usize, m: usize, k: u32, base: SupportBase) -> Result<RatingData> {
    base.validate_k(k)?;
    let mut rdr = reader(path)?;
    let headers = rdr
        .headers()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
        .clone();
    let expected = ["user", "item", "rating"];
    let has_k = headers.len() == 4 && &headers[3] == "k";
    if headers.len() < 3 || headers.iter().take(3).ne(expected) || (headers.len() > 3 && !has_k) {
        return Err(Error::Format(format!(
            "{}: header must be user,item,rating[,k], got {}",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut obs = Vec::new();
    let mut scales = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let line = line_of(&rec);
        let user: usize = parse_field(path, &rec, 0, "user")?;
        let item: usize = parse_field(path, &rec, 1, "item")?;
        let rating: i64 = parse_field(path, &rec, 2, "rating")?;
        if user >= n || item >= m {
            return Err(Error::Format(format!(
                "{} line {line}: cell ({user}, {item}) outside the {n} x {m} matrix",
                path.display()
            )));
        }
        let cell_k = if has_k {
            let kk: u32 = parse_field(path, &rec, 3, "k")?;
            base.validate_k(kk)
                .map_err(|e| Error::Format(format!("{} line {line}: {e}", path.display())))?;
            if kk != k {
                scales.insert((user, item), kk);
            }
            kk
        } else {
            k
        };
        let (lo, hi) = base.bounds(cell_k);
        if rating < lo || rating > hi {
            return Err(Error::Format(format!(
                "{} line {line}: rating {rating} outside support {lo}..={hi}",
                path.display()
            )));
        }
        obs.push(Observation::new(user, item, rating));
    }
    RatingData::with_cell_scales(n, m, k, base, scales, obs)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Reads a `user,item` cell list.
pub fn read_cells(path: &Path) -> Result<Vec<(usize, usize)>> {
    let mut rdr = reader(path)?;
    let mut cells = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        cells.push((
            parse_field(path, &rec, 0, "user")?,
            parse_field(path, &rec, 1, "item")?,
        ));
    }
    Ok(cells)
}

// ---------------------------------------------------------------------------
// Covariates
// ---------------------------------------------------------------------------

pub fn matrix_to_csv(mat: &DMatrix<f64>, prefix: &str) -> String {
    let header: Vec<String> = (1..=mat.ncols()).map(|c| format!("{prefix}{c}")).collect();
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..mat.nrows() {
        let row: Vec<String> = mat.row(i).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_matrix(path: &Path, mat: &DMatrix<f64>, prefix: &str) -> Result<()> {
    write_atomic(path, matrix_to_csv(mat, prefix).as_bytes())
}

/// Reads a covariate matrix, rejecting ragged rows and non-finite values.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut rdr = reader(path)?;
    let cols = rdr
        .headers()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
        .len();
    let mut values = Vec::new();
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let line = line_of(&rec);
        if rec.len() != cols {
            return Err(Error::Format(format!(
                "{} line {line}: expected {cols} values, found {}",
                path.display(),
                rec.len()
            )));
        }
        for c in 0..cols {
            let v: f64 = parse_field(path, &rec, c, "value")?;
            if !v.is_finite() {
                return Err(Error::Format(format!(
                    "{} line {line}, column {}: non-finite covariate {v}",
                    path.display(),
                    c + 1
                )));
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 || cols == 0 {
        return Err(Error::Format(format!("{}: no covariate rows", path.display())));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

// ---------------------------------------------------------------------------
// Draws
// ---------------------------------------------------------------------------

pub fn draws_to_csv(draws: &PosteriorDraws) -> String {
    let mut out = draws.parameter_names().join(",");
    out.push('\n');
    for d in 0..draws.len() {
        let row: Vec<String> = draws.flat_draw(d).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_draws(path: &Path, draws: &PosteriorDraws) -> Result<()> {
    write_atomic(path, draws_to_csv(draws).as_bytes())
}

/// Fills `meta` (the deserialized `model.json`) with the rows of `draws.csv`.
pub fn read_draws(path: &Path, mut meta: PosteriorDraws) -> Result<PosteriorDraws> {
    meta.coefficients.clear();
    meta.u.clear();
    meta.v.clear();
    let mut rdr = reader(path)?;
    let headers = rdr
        .headers()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
        .clone();
    let names = meta.parameter_names();
    if headers.iter().ne(names.iter().map(String::as_str)) {
        return Err(Error::Format(format!(
            "{}: columns do not match the model description",
            path.display()
        )));
    }
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let row = (0..rec.len())
            .map(|c| parse_field(path, &rec, c, "draw value"))
            .collect::<Result<Vec<f64>>>()?;
        meta.push_flat(&row)
            .map_err(|e| Error::Format(format!("{} line {}: {e}", path.display(), line_of(&rec))))?;
    }
    Ok(meta)
}
