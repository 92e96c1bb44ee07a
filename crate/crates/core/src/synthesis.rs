//! Latent-space interpolation: two source-domain inputs become synchronized
//! frame sequences in both domains, decoded from the same latent codes.
//!
//! Frames run begin→end. The blend weight on the begin latent is recorded
//! per frame (1 at the begin endpoint, descending through (n-1)/n … 1/n,
//! 0 at the end endpoint), so either frame-ordering convention can be
//! reconstructed from the file alone. Endpoint frames are decoded like the
//! interior ones; the raw inputs live in the provenance record.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::ModelBundle;
use std::io::BufRead;
use std::path::Path;

#[derive(Clone, Debug)]
pub struct Provenance {
    pub x_begin: Vec<f64>,
    pub x_end: Vec<f64>,
    pub checkpoint_id: Option<String>,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    /// Blend weight on the begin latent, strictly decreasing, length n+1.
    pub rho: Vec<f64>,
    /// Interpolated latent codes, one row per frame.
    pub latents: Matrix,
    /// Decoded source-domain frames (G1 of each latent).
    pub source: Matrix,
    /// Decoded target-domain frames (G2 of the same latents).
    pub target: Matrix,
    pub provenance: Provenance,
}

impl Trajectory {
    pub fn frame_count(&self) -> usize {
        self.rho.len()
    }

    /// Largest L2 jump between consecutive frames, per domain. Reported for
    /// smoothness inspection, never asserted.
    pub fn max_step(&self) -> (f64, f64) {
        let jump = |m: &Matrix| -> f64 {
            let mut worst = 0.0f64;
            for k in 1..m.rows() {
                let d: f64 = m
                    .row(k)
                    .iter()
                    .zip(m.row(k - 1))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                worst = worst.max(d.sqrt());
            }
            worst
        };
        (jump(&self.source), jump(&self.target))
    }
}

/// Interpolate `n` segments between the latents of two source inputs and
/// decode every frame in both domains.
pub fn interpolate(
    bundle: &ModelBundle,
    x_begin: &[f64],
    x_end: &[f64],
    n: usize,
    checkpoint_id: Option<String>,
) -> Result<Trajectory> {
    if n < 2 {
        return Err(Error::InvalidArg(format!(
            "need at least 2 interpolation frames, got {n}"
        )));
    }
    let dim = bundle.e1.input_dim();
    if x_begin.len() != dim || x_end.len() != dim {
        return Err(Error::DimMismatch(format!(
            "inputs have dims {}/{}, encoder expects {}",
            x_begin.len(),
            x_end.len(),
            dim
        )));
    }
    let z_begin = bundle
        .e1
        .forward(&Matrix::new(1, dim, x_begin.to_vec())?)?
        .into_data();
    let z_end = bundle
        .e1
        .forward(&Matrix::new(1, dim, x_end.to_vec())?)?
        .into_data();
    let latent = z_begin.len();

    let mut rho = Vec::with_capacity(n + 1);
    let mut z_data = Vec::with_capacity((n + 1) * latent);
    for k in 0..=n {
        let r = (n - k) as f64 / n as f64;
        rho.push(r);
        match k {
            // Endpoints take the encoded latents verbatim; the anchored
            // blend below is only ulp-exact for interior frames.
            0 => z_data.extend_from_slice(&z_begin),
            _ if k == n => z_data.extend_from_slice(&z_end),
            _ => {
                for d in 0..latent {
                    z_data.push(z_end[d] + r * (z_begin[d] - z_end[d]));
                }
            }
        }
    }
    let latents = Matrix::new(n + 1, latent, z_data)?;
    let source = bundle.g1.forward(&latents)?;
    let target = bundle.g2.forward(&latents)?;
    Ok(Trajectory {
        rho,
        latents,
        source,
        target,
        provenance: Provenance {
            x_begin: x_begin.to_vec(),
            x_end: x_end.to_vec(),
            checkpoint_id,
        },
    })
}

/// CSV layout: `frame,rho,domain,dim0,dim1,...` with one row per
/// (frame, domain), source before target within a frame.
pub fn export_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    if path.as_os_str().is_empty() {
        return Err(Error::InvalidArg("empty output path".into()));
    }
    let dims = traj.source.cols();
    let mut out = String::from("frame,rho,domain");
    for d in 0..dims {
        out.push_str(&format!(",dim{d}"));
    }
    out.push('\n');
    for k in 0..traj.frame_count() {
        for (domain, m) in [("source", &traj.source), ("target", &traj.target)] {
            out.push_str(&format!("{k},{},{domain}", traj.rho[k]));
            for v in m.row(k) {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[derive(Debug)]
pub struct LoadedTrajectory {
    pub rho: Vec<f64>,
    pub source: Matrix,
    pub target: Matrix,
}

/// Re-read a trajectory CSV written by [`export_csv`].
pub fn import_csv(path: &Path) -> Result<LoadedTrajectory> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path)?;
    let mut lines = std::io::BufReader::new(file).lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        path: display.clone(),
        line: 1,
        msg: "empty file".into(),
    })?;
    let header = header?;
    let dims = header.split(',').count().saturating_sub(3);
    if dims == 0 {
        return Err(Error::Parse {
            path: display,
            line: 1,
            msg: "no dim columns".into(),
        });
    }
    let mut rho = Vec::new();
    let mut source = Vec::new();
    let mut target = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != dims + 3 {
            return Err(Error::Parse {
                path: display,
                line: idx + 1,
                msg: format!("expected {} cells, got {}", dims + 3, cells.len()),
            });
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Parse {
                path: display.clone(),
                line: idx + 1,
                msg: format!("bad number '{s}'"),
            })
        };
        let r = parse(cells[1])?;
        let values: Result<Vec<f64>> = cells[3..].iter().map(|c| parse(c)).collect();
        match cells[2] {
            "source" => {
                rho.push(r);
                source.extend(values?);
            }
            "target" => target.extend(values?),
            other => {
                return Err(Error::Parse {
                    path: display,
                    line: idx + 1,
                    msg: format!("unknown domain '{other}'"),
                })
            }
        }
    }
    let frames = rho.len();
    Ok(LoadedTrajectory {
        rho,
        source: Matrix::new(frames, dims, source)?,
        target: Matrix::new(frames, dims, target)?,
    })
}

/// Simple raster scatter of both domain trajectories (source dots bright,
/// target dots dark, begin/end emphasized).
pub fn render_png(traj: &Trajectory, path: &Path, size: u32) -> Result<()> {
    let size = size.max(64);
    let (w, h) = (size as usize, size as usize);
    let mut pixels = vec![18u8; w * h * 3];

    let all: Vec<&[f64]> = traj
        .source
        .row_iter()
        .chain(traj.target.row_iter())
        .collect();
    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in &all {
        min_x = min_x.min(p[0]);
        max_x = max_x.max(p[0]);
        min_y = min_y.min(p[1]);
        max_y = max_y.max(p[1]);
    }
    let pad_x = (max_x - min_x).max(1e-9) * 0.1;
    let pad_y = (max_y - min_y).max(1e-9) * 0.1;
    min_x -= pad_x;
    max_x += pad_x;
    min_y -= pad_y;
    max_y += pad_y;

    let mut mark = |p: &[f64], rgb: [u8; 3], radius: i64| {
        let px = ((p[0] - min_x) / (max_x - min_x) * (w - 1) as f64).round() as i64;
        let py = ((max_y - p[1]) / (max_y - min_y) * (h - 1) as f64).round() as i64;
        for dy in -radius..=radius {
            for dx in -radius..=radius {
                let (x, y) = (px + dx, py + dy);
                if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
                    let at = (y as usize * w + x as usize) * 3;
                    pixels[at..at + 3].copy_from_slice(&rgb);
                }
            }
        }
    };
    for (k, p) in traj.target.row_iter().enumerate() {
        let endpoint = k == 0 || k + 1 == traj.frame_count();
        mark(p, [204, 120, 50], if endpoint { 3 } else { 1 });
    }
    for (k, p) in traj.source.row_iter().enumerate() {
        let endpoint = k == 0 || k + 1 == traj.frame_count();
        mark(p, [104, 222, 122], if endpoint { 3 } else { 1 });
    }

    let file = std::fs::File::create(path)?;
    let mut enc = png::Encoder::new(std::io::BufWriter::new(file), size, size);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc
        .write_header()
        .map_err(|e| Error::InvalidArg(format!("png: {e}")))?;
    writer
        .write_image_data(&pixels)
        .map_err(|e| Error::InvalidArg(format!("png: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bundle(seed: u64) -> ModelBundle {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ModelBundle::init(2, 4, &[8], &mut rng).unwrap()
    }

    #[test]
    fn frame_count_is_n_plus_one() {
        let b = bundle(1);
        for n in [2usize, 3, 8, 17] {
            let t = interpolate(&b, &[0.5, 0.0], &[-0.5, 1.0], n, None).unwrap();
            assert_eq!(t.frame_count(), n + 1);
            assert_eq!(t.source.rows(), n + 1);
            assert_eq!(t.target.rows(), n + 1);
        }
    }

    #[test]
    fn n_below_two_rejected() {
        let b = bundle(2);
        assert!(interpolate(&b, &[0.0, 0.0], &[1.0, 1.0], 1, None).is_err());
        assert!(interpolate(&b, &[0.0, 0.0], &[1.0, 1.0], 0, None).is_err());
    }

    #[test]
    fn rho_descends_strictly_from_one_to_zero() {
        let b = bundle(3);
        let t = interpolate(&b, &[0.1, 0.2], &[0.9, -0.3], 5, None).unwrap();
        assert_eq!(t.rho[0], 1.0);
        assert_eq!(*t.rho.last().unwrap(), 0.0);
        for w in t.rho.windows(2) {
            assert!(w[1] < w[0]);
        }
        // Interior blend weights are k/n for k = n-1 .. 1.
        assert!((t.rho[1] - 4.0 / 5.0).abs() < 1e-15);
        assert!((t.rho[4] - 1.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn latents_sit_exactly_on_the_segment() {
        let b = bundle(4);
        let t = interpolate(&b, &[0.3, -0.8], &[1.2, 0.4], 7, None).unwrap();
        let zb = t.latents.row(0).to_vec();
        let ze = t.latents.row(t.frame_count() - 1).to_vec();
        for k in 0..t.frame_count() {
            let r = t.rho[k];
            for d in 0..zb.len() {
                let expect = r * zb[d] + (1.0 - r) * ze[d];
                assert!(
                    (t.latents.get(k, d) - expect).abs() < 1e-12,
                    "frame {k} dim {d}"
                );
            }
        }
    }

    #[test]
    fn both_domains_decode_the_same_latents() {
        let b = bundle(5);
        let t = interpolate(&b, &[0.0, 1.0], &[1.0, 0.0], 4, None).unwrap();
        for k in 0..t.frame_count() {
            let z = Matrix::new(1, t.latents.cols(), t.latents.row(k).to_vec()).unwrap();
            let sx = b.g1.forward(&z).unwrap();
            let ty = b.g2.forward(&z).unwrap();
            assert_eq!(sx.data(), t.source.row(k));
            assert_eq!(ty.data(), t.target.row(k));
        }
    }

    #[test]
    fn identical_endpoints_give_constant_trajectories() {
        let b = bundle(6);
        let x = [0.4, -0.6];
        let t = interpolate(&b, &x, &x, 6, None).unwrap();
        for k in 1..t.frame_count() {
            assert_eq!(t.source.row(k), t.source.row(0));
            assert_eq!(t.target.row(k), t.target.row(0));
        }
    }

    #[test]
    fn n_two_has_single_midpoint_frame() {
        let b = bundle(7);
        let t = interpolate(&b, &[0.0, 0.0], &[1.0, 1.0], 2, None).unwrap();
        assert_eq!(t.frame_count(), 3);
        assert_eq!(t.rho[1], 0.5);
        for d in 0..t.latents.cols() {
            let mid = (t.latents.get(0, d) + t.latents.get(2, d)) / 2.0;
            assert!((t.latents.get(1, d) - mid).abs() < 1e-15);
        }
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let b = bundle(8);
        let t = interpolate(&b, &[0.2, 0.3], &[-0.9, 0.8], 2, None).unwrap();
        let path = dir.path().join("traj.csv");
        export_csv(&t, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        // 3 frames x 2 domains + header
        assert_eq!(text.lines().count(), 7);
        let loaded = import_csv(&path).unwrap();
        assert_eq!(loaded.rho, t.rho);
        assert_eq!(loaded.source.data(), t.source.data());
        assert_eq!(loaded.target.data(), t.target.data());
    }

    #[test]
    fn empty_path_rejected() {
        let b = bundle(9);
        let t = interpolate(&b, &[0.0, 0.0], &[1.0, 1.0], 2, None).unwrap();
        assert!(export_csv(&t, Path::new("")).is_err());
    }

    #[test]
    fn png_renders() {
        let dir = tempfile::tempdir().unwrap();
        let b = bundle(10);
        let t = interpolate(&b, &[0.2, 0.3], &[-0.9, 0.8], 6, None).unwrap();
        let path = dir.path().join("traj.png");
        render_png(&t, &path, 128).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[1..4], b"PNG");
    }
}
