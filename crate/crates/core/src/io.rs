//! On-disk formats.
//!
//! Signal matrices go to CSV with one sample per row and a header row of
//! channel labels; `#`-prefixed comment lines before the header carry
//! metadata (`# key=value`) such as the sample rate, invalid channels, and
//! the config hash. A little-endian binary format (`FECGMAT1`) carries the
//! same content for large runs. MI maps export as `row,col,value` CSV plus a
//! gnuplot-ready dense grid file.
//!
//! Floats are printed with Rust's shortest-roundtrip formatting, so files
//! parse back bit-identically and identical runs produce identical bytes.

use ndarray::Array2;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{FecgError, Result};
use crate::forward::RecordingSet;
use crate::mi::MIMap;
use crate::preprocess::{FrankTemplates, PeakTrain};

const BIN_MAGIC: &[u8; 8] = b"FECGMAT1";

fn parse_err(path: &Path, what: impl std::fmt::Display) -> FecgError {
    FecgError::Parse(format!("{}: {what}", path.display()))
}

/// Write a channels-by-samples matrix as CSV: comments, label header, one
/// sample per row.
pub fn write_signals_csv(
    path: &Path,
    data: &Array2<f64>,
    labels: &[String],
    sample_rate: f64,
    invalid_channels: &[usize],
    comments: &[(String, String)],
) -> Result<()> {
    if labels.len() != data.nrows() {
        return Err(FecgError::DimensionMismatch(format!(
            "{} labels for {} channels",
            labels.len(),
            data.nrows()
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    for (k, v) in comments {
        writeln!(w, "# {k}={v}")?;
    }
    writeln!(w, "# sample_rate={sample_rate}")?;
    let inv: Vec<String> = invalid_channels.iter().map(|c| c.to_string()).collect();
    writeln!(w, "# invalid_channels={}", inv.join(";"))?;
    writeln!(w, "{}", labels.join(","))?;
    let mut line = String::new();
    for t in 0..data.ncols() {
        line.clear();
        for ch in 0..data.nrows() {
            if ch > 0 {
                line.push(',');
            }
            line.push_str(&format!("{}", data[[ch, t]]));
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

/// Parsed signals CSV.
pub struct SignalsCsv {
    pub data: Array2<f64>,
    pub labels: Vec<String>,
    pub sample_rate: f64,
    pub invalid_channels: Vec<usize>,
    pub comments: BTreeMap<String, String>,
}

pub fn read_signals_csv(path: &Path) -> Result<SignalsCsv> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut comments = BTreeMap::new();
    let mut header = String::new();
    loop {
        header.clear();
        if reader.read_line(&mut header)? == 0 {
            return Err(parse_err(path, "missing header row"));
        }
        let line = header.trim_end();
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((k, v)) = comment.trim().split_once('=') {
                comments.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        break;
    }
    let labels: Vec<String> = header.trim_end().split(',').map(str::to_string).collect();
    let n = labels.len();
    let mut values: Vec<f64> = Vec::new();
    let mut rows = 0usize;
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        let trimmed = line.trim_end();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut count = 0usize;
        for field in trimmed.split(',') {
            values.push(
                field
                    .parse::<f64>()
                    .map_err(|e| parse_err(path, format!("row {rows}: {e}")))?,
            );
            count += 1;
        }
        if count != n {
            return Err(parse_err(
                path,
                format!("row {rows} has {count} fields, expected {n}"),
            ));
        }
        rows += 1;
    }
    // Stored sample-per-row; flip to channels x samples.
    let mut data = Array2::<f64>::zeros((n, rows));
    for t in 0..rows {
        for ch in 0..n {
            data[[ch, t]] = values[t * n + ch];
        }
    }
    let sample_rate = comments
        .get("sample_rate")
        .ok_or_else(|| parse_err(path, "missing sample_rate comment"))?
        .parse::<f64>()
        .map_err(|e| parse_err(path, format!("sample_rate: {e}")))?;
    let invalid_channels = match comments.get("invalid_channels") {
        Some(s) if !s.is_empty() => s
            .split(';')
            .map(|v| v.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(path, format!("invalid_channels: {e}")))?,
        _ => Vec::new(),
    };
    Ok(SignalsCsv {
        data,
        labels,
        sample_rate,
        invalid_channels,
        comments,
    })
}

/// Write a recording (data + metadata) as CSV.
pub fn write_recording_csv(
    path: &Path,
    rec: &RecordingSet,
    comments: &[(String, String)],
) -> Result<()> {
    let invalid: Vec<usize> = (0..rec.n_channels()).filter(|&c| !rec.valid[c]).collect();
    write_signals_csv(
        path,
        &rec.data,
        &rec.labels,
        rec.sample_rate,
        &invalid,
        comments,
    )
}

pub fn read_recording_csv(path: &Path) -> Result<RecordingSet> {
    let parsed = read_signals_csv(path)?;
    let mut rec = RecordingSet::new(parsed.data, parsed.sample_rate, parsed.labels)?;
    for ch in parsed.invalid_channels {
        if ch < rec.valid.len() {
            rec.valid[ch] = false;
        }
    }
    Ok(rec)
}

/// Binary matrix format: magic, channel/sample counts, sample rate, labels,
/// validity flags, then channel-major f64 data, all little-endian.
pub fn write_recording_bin(path: &Path, rec: &RecordingSet) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(BIN_MAGIC)?;
    w.write_all(&(rec.n_channels() as u32).to_le_bytes())?;
    w.write_all(&(rec.n_samples() as u64).to_le_bytes())?;
    w.write_all(&rec.sample_rate.to_le_bytes())?;
    for label in &rec.labels {
        let bytes = label.as_bytes();
        w.write_all(&(bytes.len() as u32).to_le_bytes())?;
        w.write_all(bytes)?;
    }
    for &v in &rec.valid {
        w.write_all(&[u8::from(v)])?;
    }
    for ch in 0..rec.n_channels() {
        for t in 0..rec.n_samples() {
            w.write_all(&rec.data[[ch, t]].to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_recording_bin(path: &Path) -> Result<RecordingSet> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != BIN_MAGIC {
        return Err(parse_err(path, "bad magic; not a FECGMAT1 file"));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    let n = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b8)?;
    let t = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8)?;
    let sample_rate = f64::from_le_bytes(b8);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut b4)?;
        let len = u32::from_le_bytes(b4) as usize;
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf)?;
        labels.push(String::from_utf8(buf).map_err(|e| parse_err(path, e))?);
    }
    let mut valid = Vec::with_capacity(n);
    for _ in 0..n {
        let mut b1 = [0u8; 1];
        r.read_exact(&mut b1)?;
        valid.push(b1[0] != 0);
    }
    let mut data = Array2::<f64>::zeros((n, t));
    for ch in 0..n {
        for s in 0..t {
            r.read_exact(&mut b8)?;
            data[[ch, s]] = f64::from_le_bytes(b8);
        }
    }
    let mut rec = RecordingSet::new(data, sample_rate, labels)?;
    rec.valid = valid;
    Ok(rec)
}

/// Plain numeric matrix as CSV: comment lines, a `c0,c1,...` header, one
/// matrix row per line.
pub fn write_matrix_csv(path: &Path, m: &Array2<f64>, comments: &[(String, String)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (k, v) in comments {
        writeln!(w, "# {k}={v}")?;
    }
    let header: Vec<String> = (0..m.ncols()).map(|c| format!("c{c}")).collect();
    writeln!(w, "{}", header.join(","))?;
    for r in 0..m.nrows() {
        let fields: Vec<String> = (0..m.ncols()).map(|c| format!("{}", m[[r, c]])).collect();
        writeln!(w, "{}", fields.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    let parsed = read_signals_csv_no_meta(path)?;
    Ok(parsed)
}

// Matrix reader: same layout as the signals CSV but without required
// metadata comments; rows stay rows.
fn read_signals_csv_no_meta(path: &Path) -> Result<Array2<f64>> {
    let reader = BufReader::new(File::open(path)?);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut header_skipped = false;
    for line in reader.lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if !header_skipped {
            header_skipped = true;
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            trimmed.split(',').map(|f| f.parse::<f64>()).collect();
        rows.push(row.map_err(|e| parse_err(path, e))?);
    }
    if rows.is_empty() {
        return Err(parse_err(path, "no data rows"));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(parse_err(path, "ragged rows"));
    }
    let mut m = Array2::<f64>::zeros((rows.len(), ncols));
    for (r, row) in rows.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            m[[r, c]] = *v;
        }
    }
    Ok(m)
}

/// MI map as `row,col,value` CSV; absent cells print `nan`.
pub fn write_mimap_csv(path: &Path, map: &MIMap, comments: &[(String, String)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (k, v) in comments {
        writeln!(w, "# {k}={v}")?;
    }
    writeln!(w, "# kind={:?}", map.kind)?;
    writeln!(w, "row,col,value")?;
    for (ch, value) in map.values.iter().enumerate() {
        let (r, c) = map.layout.cells[ch];
        match value {
            Some(v) => writeln!(w, "{r},{c},{v}")?,
            None => writeln!(w, "{r},{c},nan")?,
        }
    }
    w.flush()?;
    Ok(())
}

/// Dense gnuplot-compatible grid: one line per grid row, space-separated,
/// `nan` where no value is present.
pub fn write_mimap_grid(path: &Path, map: &MIMap, comments: &[(String, String)]) -> Result<()> {
    let grid = map.grid();
    let mut w = BufWriter::new(File::create(path)?);
    for (k, v) in comments {
        writeln!(w, "# {k}={v}")?;
    }
    writeln!(w, "# rows={} cols={}", grid.nrows(), grid.ncols())?;
    for r in 0..grid.nrows() {
        let fields: Vec<String> = (0..grid.ncols())
            .map(|c| {
                let v = grid[[r, c]];
                if v.is_nan() {
                    "nan".to_string()
                } else {
                    format!("{v}")
                }
            })
            .collect();
        writeln!(w, "{}", fields.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

/// Peak train as a one-column CSV of sample indices.
pub fn write_peaks_csv(
    path: &Path,
    peaks: &PeakTrain,
    sample_rate: f64,
    comments: &[(String, String)],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (k, v) in comments {
        writeln!(w, "# {k}={v}")?;
    }
    writeln!(w, "# sample_rate={sample_rate}")?;
    if let Some(src) = peaks.source_channel {
        writeln!(w, "# source_channel={src}")?;
    }
    writeln!(w, "sample_index")?;
    for &p in &peaks.indices {
        writeln!(w, "{p}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_peaks_csv(path: &Path) -> Result<PeakTrain> {
    let reader = BufReader::new(File::open(path)?);
    let mut indices = Vec::new();
    let mut source_channel = None;
    let mut seen_header = false;
    for line in reader.lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some((k, v)) = comment.trim().split_once('=') {
                if k.trim() == "source_channel" {
                    source_channel = v.trim().parse::<usize>().ok();
                }
            }
            continue;
        }
        if !seen_header {
            seen_header = true;
            continue;
        }
        indices.push(
            trimmed
                .parse::<usize>()
                .map_err(|e| parse_err(path, e))?,
        );
    }
    PeakTrain::new(indices, source_channel)
}

/// Frank templates as a three-column CSV (`x,y,z`), one sample per row.
pub fn write_frank_templates_csv(path: &Path, templates: &FrankTemplates) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# sample_rate={}", templates.sample_rate)?;
    writeln!(w, "# r_offset={}", templates.r_offset)?;
    writeln!(w, "x,y,z")?;
    for i in 0..templates.len() {
        writeln!(
            w,
            "{},{},{}",
            templates.waveforms[0][i], templates.waveforms[1][i], templates.waveforms[2][i]
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_frank_templates_csv(path: &Path) -> Result<FrankTemplates> {
    let parsed = read_signals_csv(path)?;
    if parsed.data.nrows() != 3 {
        return Err(parse_err(path, "Frank templates need exactly 3 columns"));
    }
    let r_offset = parsed
        .comments
        .get("r_offset")
        .ok_or_else(|| parse_err(path, "missing r_offset comment"))?
        .parse::<usize>()
        .map_err(|e| parse_err(path, e))?;
    Ok(FrankTemplates {
        waveforms: [
            parsed.data.row(0).to_vec(),
            parsed.data.row(1).to_vec(),
            parsed.data.row(2).to_vec(),
        ],
        r_offset,
        sample_rate: parsed.sample_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::GridLayout;
    use crate::mi::MapKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tmpdir() -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "fecg-io-test-{}-{}",
            std::process::id(),
            rand::random::<u32>()
        ));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    fn random_recording(n: usize, t: usize, seed: u64) -> RecordingSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Array2::<f64>::zeros((n, t));
        for v in data.iter_mut() {
            *v = rng.gen::<f64>() * 2.0 - 1.0;
        }
        let mut rec =
            RecordingSet::new(data, 1000.0, (0..n).map(|i| format!("r0c{i}")).collect()).unwrap();
        rec.valid[1] = false;
        rec
    }

    #[test]
    fn recording_csv_roundtrip_is_exact() {
        let dir = tmpdir();
        let rec = random_recording(4, 200, 1);
        let path = dir.join("rec.csv");
        write_recording_csv(&path, &rec, &[("config_hash".into(), "abc".into())]).unwrap();
        let back = read_recording_csv(&path).unwrap();
        assert_eq!(rec, back);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn recording_bin_roundtrip_is_exact() {
        let dir = tmpdir();
        let rec = random_recording(3, 500, 2);
        let path = dir.join("rec.bin");
        write_recording_bin(&path, &rec).unwrap();
        let back = read_recording_bin(&path).unwrap();
        assert_eq!(rec, back);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tmpdir();
        let path = dir.join("bad.bin");
        std::fs::write(&path, b"NOTMAGIC rest").unwrap();
        assert!(read_recording_bin(&path).is_err());
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn mimap_files_written() {
        let dir = tmpdir();
        let map = MIMap {
            layout: GridLayout {
                n_rows: 2,
                n_cols: 2,
                cells: vec![(0, 0), (0, 1), (1, 0), (1, 1)],
            },
            values: vec![Some(0.5), None, Some(1.25), Some(0.0)],
            kind: MapKind::Maternal,
        };
        let csv = dir.join("map.csv");
        let grid = dir.join("map.grid");
        write_mimap_csv(&csv, &map, &[]).unwrap();
        write_mimap_grid(&grid, &map, &[]).unwrap();
        let text = std::fs::read_to_string(&csv).unwrap();
        assert!(text.contains("0,0,0.5"));
        assert!(text.contains("0,1,nan"));
        let gtext = std::fs::read_to_string(&grid).unwrap();
        assert!(gtext.lines().any(|l| l == "0.5 nan"));
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn peaks_roundtrip() {
        let dir = tmpdir();
        let peaks = PeakTrain::new(vec![10, 250, 811], Some(3)).unwrap();
        let path = dir.join("peaks.csv");
        write_peaks_csv(&path, &peaks, 500.0, &[]).unwrap();
        let back = read_peaks_csv(&path).unwrap();
        assert_eq!(peaks, back);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn frank_templates_roundtrip() {
        let dir = tmpdir();
        let templates = FrankTemplates::synthetic(250.0);
        let path = dir.join("frank.csv");
        write_frank_templates_csv(&path, &templates).unwrap();
        let back = read_frank_templates_csv(&path).unwrap();
        assert_eq!(templates, back);
        std::fs::remove_dir_all(dir).unwrap();
    }
}
