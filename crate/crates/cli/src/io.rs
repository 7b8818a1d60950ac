//! Point-cloud readers and CSV writers.

use std::fs::{self, File};
use std::io::{BufRead, BufReader};
use std::path::Path;

use gpdm::geometry::dedup_points;
use gpdm::ghost::GhostFrame;
use gpdm::kernel::BandwidthReport;
use gpdm::spectral::EigenBasis;
use gpdm::{CsrMatrix, PointCloud};

use crate::error::{HarnessError, Result};

/// Loaded cloud plus how many duplicate vertices were merged.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub cloud: PointCloud,
    pub duplicates_removed: usize,
}

fn parse_err(path: &Path, line: usize, reason: impl Into<String>) -> HarnessError {
    HarnessError::Parse { path: path.to_path_buf(), line, reason: reason.into() }
}

/// Rows of reals; a trailing column of `0`/`1` flags marks boundary points.
///
/// `flags`: `Some(true)` requires the column, `Some(false)` forbids it, `None`
/// detects it (every row's last field is the literal `0` or `1` and there are
/// more than `d + 1` columns). A first row that does not parse is taken as a header.
pub fn read_point_cloud_csv(path: &Path, d: usize, flags: Option<bool>) -> Result<PointCloud> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).comment(Some(b'#')).from_path(path)?;
    let mut rows: Vec<(usize, Vec<String>)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        rows.push((i + 1, rec.iter().map(str::to_owned).collect()));
    }
    if let Some((_, first)) = rows.first() {
        if first.iter().any(|f| f.parse::<f64>().is_err()) {
            rows.remove(0);
        }
    }
    if rows.is_empty() {
        return Err(parse_err(path, 0, "no data rows"));
    }
    let width = rows[0].1.len();
    let has_flags = match flags {
        Some(v) => v,
        None => width > d + 1 && rows.iter().all(|(_, r)| matches!(r.last().map(String::as_str), Some("0" | "1"))),
    };
    let m = if has_flags { width.saturating_sub(1) } else { width };
    if m == 0 {
        return Err(parse_err(path, rows[0].0, "no coordinate columns"));
    }
    let mut coords = Vec::with_capacity(rows.len() * m);
    let mut boundary = Vec::new();
    for (idx, (line, r)) in rows.iter().enumerate() {
        if r.len() != width {
            return Err(parse_err(path, *line, format!("expected {width} fields, found {}", r.len())));
        }
        for f in &r[..m] {
            coords.push(f.parse::<f64>().map_err(|_| parse_err(path, *line, format!("not a number: {f:?}")))?);
        }
        if has_flags {
            match r[m].as_str() {
                "1" => boundary.push(idx),
                "0" => {}
                other => return Err(parse_err(path, *line, format!("boundary flag must be 0 or 1, got {other:?}"))),
            }
        }
    }
    Ok(PointCloud::new(coords, m, d, boundary)?)
}

/// Vertices (`v x y z`) of a Wavefront OBJ file; everything else is ignored.
/// Vertices closer than `1e-12` times the diameter are merged.
pub fn read_obj(path: &Path, d: usize) -> Result<Ingested> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut coords = Vec::new();
    let mut m = 0usize;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| HarnessError::io(path, e))?;
        let mut it = line.split_whitespace();
        if it.next() != Some("v") {
            continue;
        }
        let vals: Vec<f64> = it
            .take(3)
            .map(|t| t.parse::<f64>().map_err(|_| parse_err(path, i + 1, format!("bad vertex coordinate {t:?}"))))
            .collect::<Result<_>>()?;
        if vals.len() != 3 {
            return Err(parse_err(path, i + 1, "vertex needs three coordinates"));
        }
        m = 3;
        coords.extend(vals);
    }
    if m == 0 {
        return Err(parse_err(path, 0, "no vertices"));
    }
    let before = coords.len() / m;
    let (kept, _) = dedup_points(&coords, m);
    let duplicates_removed = before - kept.len() / m;
    Ok(Ingested { cloud: PointCloud::new(kept, m, d, Vec::new())?, duplicates_removed })
}

/// Dispatches on the extension: `.obj` or CSV.
pub fn load_cloud(path: &Path, d: usize) -> Result<Ingested> {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("obj") => read_obj(path, d),
        _ => Ok(Ingested { cloud: read_point_cloud_csv(path, d, None)?, duplicates_removed: 0 }),
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    Ok(csv::Writer::from_path(path)?)
}

fn coord_headers(prefix: &str, m: usize) -> Vec<String> {
    (1..=m).map(|r| format!("{prefix}{r}")).collect()
}

/// `row,col,value` triplets.
pub fn write_operator_triplets(path: &Path, a: &CsrMatrix) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["row", "col", "value"])?;
    for (r, c, v) in a.triplets() {
        w.write_record([r.to_string(), c.to_string(), format!("{v:e}")])?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// `epsilon,logS` over the tuning grid.
pub fn write_bandwidth_csv(path: &Path, report: &BandwidthReport) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["epsilon", "logS"])?;
    for (e, s) in report.epsilon_grid.iter().zip(&report.log_s) {
        w.write_record([format!("{e:e}"), format!("{s:e}")])?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// `b,k,x1..xm`; `k = 0` rows are the interior ghosts `x_b - h nu`.
pub fn write_ghost_frame_csv(path: &Path, frame: &GhostFrame) -> Result<()> {
    let m = frame.m;
    let mut w = writer(path)?;
    let mut head = vec!["b".to_string(), "k".to_string()];
    head.extend(coord_headers("x", m));
    w.write_record(&head)?;
    for b in 0..frame.boundary.len() {
        let ig = &frame.interior_ghosts[b * m..(b + 1) * m];
        for k in 0..=frame.layers {
            let p = if k == 0 { ig } else { frame.ghost(b, k) };
            let mut rec = vec![frame.boundary[b].to_string(), k.to_string()];
            rec.extend(p.iter().map(|v| format!("{v:e}")));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// `idx,x1..xm,U,u_true,abs_err`.
pub fn write_snapshot_csv(path: &Path, coords: &[f64], m: usize, u: &[f64], truth: &[f64]) -> Result<()> {
    if coords.len() != u.len() * m || truth.len() != u.len() {
        return Err(HarnessError::Argument("snapshot arrays disagree in length".into()));
    }
    let mut w = writer(path)?;
    let mut head = vec!["idx".to_string()];
    head.extend(coord_headers("x", m));
    head.extend(["U", "u_true", "abs_err"].map(String::from));
    w.write_record(&head)?;
    for i in 0..u.len() {
        let mut rec = vec![i.to_string()];
        rec.extend(coords[i * m..(i + 1) * m].iter().map(|v| format!("{v:e}")));
        rec.extend([u[i], truth[i], (u[i] - truth[i]).abs()].map(|v| format!("{v:e}")));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// `k,lambda,defect`, where `defect` is the largest Gram-matrix deviation in row `k`.
pub fn write_eigenbasis_csv(path: &Path, basis: &EigenBasis) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["k", "lambda", "orthogonality_defect"])?;
    for (k, (l, d)) in basis.values.iter().zip(basis.defects()).enumerate() {
        w.write_record([k.to_string(), format!("{l:e}"), format!("{d:e}")])?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Writes `text` to `path`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn tmp_file(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn csv_with_flags_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = tmp_file(&dir, "c.csv", "x,y,is_boundary\n0,0,1\n0.5,0.1,0\n1,0,1\n");
        let c = read_point_cloud_csv(&p, 1, None).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.ambient_dim(), 2);
        assert_eq!(c.boundary(), &[0, 2]);
    }

    #[test]
    fn csv_without_flags() {
        let dir = tempfile::tempdir().unwrap();
        let p = tmp_file(&dir, "c.csv", "0.1,0.2,0.3\n0.4,0.5,0.6\n");
        let c = read_point_cloud_csv(&p, 2, None).unwrap();
        assert_eq!(c.ambient_dim(), 3);
        assert!(c.boundary().is_empty());
        let forced = read_point_cloud_csv(&p, 1, Some(false)).unwrap();
        assert_eq!(forced.ambient_dim(), 3);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = tmp_file(&dir, "c.csv", "0,0\n1,abc\n");
        match read_point_cloud_csv(&p, 1, None) {
            Err(HarnessError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let q = tmp_file(&dir, "d.csv", "0,0,0\n1,1,2\n");
        assert!(read_point_cloud_csv(&q, 1, Some(true)).is_err());
    }

    #[test]
    fn obj_vertices_deduplicated() {
        let dir = tempfile::tempdir().unwrap();
        let p = tmp_file(&dir, "m.obj", "# cube corner\nv 0 0 0\nv 1 0 0\nvn 0 0 1\nv 0 1 0\nv 1 0 0\nf 1 2 3\nv 0 0 1\n");
        let ing = load_cloud(&p, 2).unwrap();
        assert_eq!(ing.cloud.len(), 4);
        assert_eq!(ing.duplicates_removed, 1);
        let bad = tmp_file(&dir, "b.obj", "v 0 0\n");
        assert!(read_obj(&bad, 2).is_err());
    }

    #[test]
    fn writers_round_trip_shapes() {
        let dir = tempfile::tempdir().unwrap();
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, -1.0), (0, 1, 1.0), (1, 1, 0.0)]).unwrap();
        let p = dir.path().join("sub/op.csv");
        write_operator_triplets(&p, &a).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("row,col,value\n"));
        let q = dir.path().join("snap.csv");
        write_snapshot_csv(&q, &[0.0, 1.0, 2.0, 3.0], 2, &[1.0, 2.0], &[1.0, 1.5]).unwrap();
        let snap = fs::read_to_string(&q).unwrap();
        assert_eq!(snap.lines().next().unwrap(), "idx,x1,x2,U,u_true,abs_err");
        assert_eq!(snap.lines().count(), 3);
        assert!(write_snapshot_csv(&q, &[0.0], 2, &[1.0], &[1.0]).is_err());
    }
}
