//! PSNR and SSIM, optionally restricted to a validity mask.

use image::RgbImage;

use crate::error::{Error, Result};

pub const PSNR_CAP: f64 = 100.0;
const WIN: usize = 11;
const SIGMA: f64 = 1.5;
const C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

fn check_dims(a: &RgbImage, b: &RgbImage, mask: Option<&[bool]>) -> Result<()> {
    if a.dimensions() != b.dimensions() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            a.dimensions(),
            b.dimensions()
        )));
    }
    if let Some(m) = mask {
        if m.len() != (a.width() * a.height()) as usize {
            return Err(Error::DimensionMismatch(format!(
                "mask of {} for {}x{}",
                m.len(),
                a.width(),
                a.height()
            )));
        }
    }
    Ok(())
}

/// PSNR over all channels of the (masked) pixels; `PSNR_CAP` when equal.
pub fn psnr(a: &RgbImage, b: &RgbImage, mask: Option<&[bool]>) -> Result<f64> {
    check_dims(a, b, mask)?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, (pa, pb)) in a.pixels().zip(b.pixels()).enumerate() {
        if mask.is_some_and(|m| !m[i]) {
            continue;
        }
        for c in 0..3 {
            let d = pa.0[c] as f64 - pb.0[c] as f64;
            sum += d * d;
        }
        n += 3;
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    if sum == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok(10.0 * (255.0 * 255.0 / (sum / n as f64)).log10())
}

fn gaussian() -> [f64; WIN] {
    let mut g = [0.0; WIN];
    let r = (WIN / 2) as f64;
    for (i, v) in g.iter_mut().enumerate() {
        let d = i as f64 - r;
        *v = (-d * d / (2.0 * SIGMA * SIGMA)).exp();
    }
    let s: f64 = g.iter().sum();
    g.map(|v| v / s)
}

/// Valid-mode separable filter of a `w x h` plane.
fn filter_valid(plane: &[f64], w: usize, h: usize, g: &[f64; WIN]) -> Vec<f64> {
    let ow = w - WIN + 1;
    let oh = h - WIN + 1;
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let src = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = (0..WIN).map(|k| g[k] * src[x + k]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..WIN).map(|k| g[k] * rows[(y + k) * ow + x]).sum();
        }
    }
    out
}

/// SSIM map of one channel over every fully interior window position.
fn ssim_map(a: &RgbImage, b: &RgbImage, channel: usize) -> Vec<f64> {
    let (w, h) = (a.width() as usize, a.height() as usize);
    let g = gaussian();
    let pa: Vec<f64> = a.pixels().map(|p| p.0[channel] as f64).collect();
    let pb: Vec<f64> = b.pixels().map(|p| p.0[channel] as f64).collect();
    let sq = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| x * y).collect::<Vec<_>>();
    let mu_a = filter_valid(&pa, w, h, &g);
    let mu_b = filter_valid(&pb, w, h, &g);
    let e_aa = filter_valid(&sq(&pa, &pa), w, h, &g);
    let e_bb = filter_valid(&sq(&pb, &pb), w, h, &g);
    let e_ab = filter_valid(&sq(&pa, &pb), w, h, &g);
    (0..mu_a.len())
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let var_a = e_aa[i] - ma * ma;
            let var_b = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            ((2.0 * ma * mb + C1) * (2.0 * cov + C2)) / ((ma * ma + mb * mb + C1) * (var_a + var_b + C2))
        })
        .collect()
}

/// Marks window positions whose whole footprint lies inside the mask.
fn interior_windows(mask: &[bool], w: usize, h: usize) -> Vec<bool> {
    let mut integral = vec![0u32; (w + 1) * (h + 1)];
    for y in 0..h {
        for x in 0..w {
            integral[(y + 1) * (w + 1) + x + 1] = mask[y * w + x] as u32 + integral[y * (w + 1) + x + 1]
                + integral[(y + 1) * (w + 1) + x]
                - integral[y * (w + 1) + x];
        }
    }
    let ow = w - WIN + 1;
    let oh = h - WIN + 1;
    let at = |x: usize, y: usize| integral[y * (w + 1) + x];
    let full = (WIN * WIN) as u32;
    let mut out = vec![false; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            let s = at(x + WIN, y + WIN) + at(x, y) - at(x + WIN, y) - at(x, y + WIN);
            out[y * ow + x] = s == full;
        }
    }
    out
}

/// Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5), averaged
/// over channels. With a mask, only windows lying entirely inside it count.
pub fn ssim(a: &RgbImage, b: &RgbImage, mask: Option<&[bool]>) -> Result<f64> {
    check_dims(a, b, mask)?;
    let (w, h) = (a.width() as usize, a.height() as usize);
    if w < WIN || h < WIN {
        return Err(Error::InvalidInput(format!("{w}x{h} image is smaller than the SSIM window")));
    }
    let keep = mask.map(|m| interior_windows(m, w, h));
    let count = keep.as_ref().map_or((w - WIN + 1) * (h - WIN + 1), |k| k.iter().filter(|&&v| v).count());
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    let mut total = 0.0;
    for c in 0..3 {
        let map = ssim_map(a, b, c);
        let sum: f64 = match &keep {
            Some(k) => map.iter().zip(k).filter(|(_, &k)| k).map(|(v, _)| v).sum(),
            None => map.iter().sum(),
        };
        total += sum / count as f64;
    }
    Ok(total / 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub psnr: f64,
    pub ssim: f64,
    /// `None` when the mask is empty.
    pub masked_psnr: Option<f64>,
    /// `None` when no SSIM window fits inside the mask.
    pub masked_ssim: Option<f64>,
    pub mask_coverage: f64,
}

pub fn report(generated: &RgbImage, target: &RgbImage, mask: &[bool]) -> Result<MetricReport> {
    check_dims(generated, target, Some(mask))?;
    let covered = mask.iter().filter(|&&m| m).count();
    let optional = |r: Result<f64>| match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::EmptyMask) => Ok(None),
        Err(e) => Err(e),
    };
    Ok(MetricReport {
        psnr: psnr(generated, target, None)?,
        ssim: ssim(generated, target, None)?,
        masked_psnr: optional(psnr(generated, target, Some(mask)))?,
        masked_ssim: optional(ssim(generated, target, Some(mask)))?,
        mask_coverage: if mask.is_empty() { 0.0 } else { covered as f64 / mask.len() as f64 },
    })
}

/// Running means over reports; merging is associative.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MetricSummary {
    pub pairs: usize,
    pub psnr_sum: f64,
    pub ssim_sum: f64,
    pub masked_psnr_sum: f64,
    pub masked_psnr_count: usize,
    pub masked_ssim_sum: f64,
    pub masked_ssim_count: usize,
    pub coverage_sum: f64,
}

impl MetricSummary {
    pub fn add(&mut self, r: &MetricReport) {
        self.pairs += 1;
        self.psnr_sum += r.psnr;
        self.ssim_sum += r.ssim;
        self.coverage_sum += r.mask_coverage;
        if let Some(v) = r.masked_psnr {
            self.masked_psnr_sum += v;
            self.masked_psnr_count += 1;
        }
        if let Some(v) = r.masked_ssim {
            self.masked_ssim_sum += v;
            self.masked_ssim_count += 1;
        }
    }

    pub fn merge(mut self, o: &MetricSummary) -> MetricSummary {
        self.pairs += o.pairs;
        self.psnr_sum += o.psnr_sum;
        self.ssim_sum += o.ssim_sum;
        self.masked_psnr_sum += o.masked_psnr_sum;
        self.masked_psnr_count += o.masked_psnr_count;
        self.masked_ssim_sum += o.masked_ssim_sum;
        self.masked_ssim_count += o.masked_ssim_count;
        self.coverage_sum += o.coverage_sum;
        self
    }

    /// Plain-text table with one header row and one value row.
    pub fn table(&self) -> String {
        let mean = |s: f64, n: usize| if n == 0 { "-".to_string() } else { format!("{:.4}", s / n as f64) };
        format!(
            "{:>8} {:>10} {:>10} {:>12} {:>12} {:>10}\n{:>8} {:>10} {:>10} {:>12} {:>12} {:>10}\n",
            "pairs",
            "PSNR",
            "SSIM",
            "masked_PSNR",
            "masked_SSIM",
            "coverage",
            self.pairs,
            mean(self.psnr_sum, self.pairs),
            mean(self.ssim_sum, self.pairs),
            mean(self.masked_psnr_sum, self.masked_psnr_count),
            mean(self.masked_ssim_sum, self.masked_ssim_count),
            mean(self.coverage_sum, self.pairs),
        )
    }
}
