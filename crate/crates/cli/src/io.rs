//! CSV point files: no header, one point per row, comma-separated floats.

use std::path::Path;

use graphtest::PointSample;

/// Parse failure with enough context to act on.
#[derive(Debug)]
pub struct CsvError {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for CsvError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl std::error::Error for CsvError {}

/// Read a point sample from a CSV file.
pub fn read_points(path: &Path) -> Result<PointSample, CsvError> {
    let text = std::fs::read_to_string(path).map_err(|e| CsvError {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line
            .split(',')
            .map(|cell| cell.trim().parse::<f64>())
            .collect();
        match row {
            Ok(r) => rows.push(r),
            Err(e) => {
                return Err(CsvError {
                    path: path.display().to_string(),
                    message: format!("line {}: {}", lineno + 1, e),
                })
            }
        }
    }
    if rows.is_empty() {
        return Err(CsvError {
            path: path.display().to_string(),
            message: "no data rows".into(),
        });
    }
    PointSample::from_rows(&rows).map_err(|e| CsvError {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Render a point sample back to CSV text.
pub fn points_to_csv(sample: &PointSample) -> String {
    let mut out = String::new();
    for i in 0..sample.len() {
        let row: Vec<String> = sample.row(i).iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn round_trips_points() {
        let file = tempfile_path("points");
        let sample =
            PointSample::new(vec![0.25, -1.0, 3.5, 0.125, 2.0, -0.75], 3).unwrap();
        std::fs::File::create(&file)
            .unwrap()
            .write_all(points_to_csv(&sample).as_bytes())
            .unwrap();
        let back = read_points(&file).unwrap();
        assert_eq!(back.data(), sample.data());
        assert_eq!(back.dim(), 3);
        std::fs::remove_file(&file).ok();
    }

    #[test]
    fn reports_bad_cells_with_line_numbers() {
        let file = tempfile_path("bad");
        std::fs::write(&file, "1.0,2.0\n1.0,oops\n").unwrap();
        let err = read_points(&file).unwrap_err();
        assert!(err.message.contains("line 2"));
        std::fs::remove_file(&file).ok();
    }

    fn tempfile_path(tag: &str) -> std::path::PathBuf {
        let mut p = std::env::temp_dir();
        p.push(format!("graphtest-io-{tag}-{}.csv", std::process::id()));
        p
    }
}
