//! Shoebox room impulse responses by the image-source method.
//!
//! Mirroring the source across the six walls yields a lattice of image
//! sources. Each image contributes an impulse delayed by `d / c` and scaled
//! by the product of the crossed walls' reflectivities over `4πd`. Arrivals
//! are rendered with an 81-tap Hann-windowed sinc so fractional delays stay
//! band-limited.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{ImpulseResponse, RirKind};
use crate::error::{Error, Result};
use crate::wave::Waveform;

pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;
/// Level of the weakest image kept by the adaptive order rule.
const ADAPTIVE_FLOOR: f64 = 1e-3;
const SINC_HALF_TAPS: i64 = 40;
const TAIL_SECONDS: f64 = 0.05;
const MAX_SECONDS: f64 = 10.0;

/// Walls are ordered x=0, x=Lx, y=0, y=Ly, z=0, z=Lz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub dimensions: [f64; 3],
    pub source: [f64; 3],
    pub mic: [f64; 3],
    pub reflectivity: [f64; 6],
    /// `None` picks the order adaptively.
    pub max_order: Option<usize>,
    pub sample_rate: u32,
    pub speed_of_sound: f64,
}

impl RoomSpec {
    pub fn new(dimensions: [f64; 3], source: [f64; 3], mic: [f64; 3], beta: f64, sample_rate: u32) -> Self {
        Self {
            dimensions,
            source,
            mic,
            reflectivity: [beta; 6],
            max_order: None,
            sample_rate,
            speed_of_sound: DEFAULT_SPEED_OF_SOUND,
        }
    }

    pub fn with_max_order(mut self, order: usize) -> Self {
        self.max_order = Some(order);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimensions.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::invalid(format!("room dimensions must be positive: {:?}", self.dimensions)));
        }
        for (name, p) in [("source", self.source), ("mic", self.mic)] {
            let inside = p.iter().zip(&self.dimensions).all(|(&c, &l)| c > 0.0 && c < l);
            if !inside {
                return Err(Error::invalid(format!("{name} {p:?} not strictly inside {:?}", self.dimensions)));
            }
        }
        if self.source == self.mic {
            return Err(Error::invalid("source and mic coincide"));
        }
        if let Some(b) = self.reflectivity.iter().find(|&&b| !(0.0..1.0).contains(&b)) {
            return Err(Error::invalid(format!("wall reflectivity {b} outside [0, 1)")));
        }
        if self.sample_rate == 0 || !(self.speed_of_sound > 0.0) {
            return Err(Error::invalid("sample rate and speed of sound must be positive"));
        }
        Ok(())
    }

    pub fn direct_distance(&self) -> f64 {
        distance(self.source, self.mic)
    }

    /// Explicit order, or the smallest order at which every image is at
    /// least 60 dB below the direct path on reflectivity alone.
    pub fn effective_order(&self) -> usize {
        if let Some(n) = self.max_order {
            return n;
        }
        let beta = self.reflectivity.iter().cloned().fold(0.0, f64::max);
        if beta <= 0.0 {
            return 0;
        }
        (ADAPTIVE_FLOOR.ln() / beta.ln()).ceil() as usize
    }
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageSource {
    pub position: [f64; 3],
    /// Reflection count per wall, same order as `RoomSpec::reflectivity`.
    pub reflections: [u32; 6],
    pub distance: f64,
    pub delay_s: f64,
    pub amplitude: f64,
}

impl ImageSource {
    pub fn order(&self) -> u32 {
        self.reflections.iter().sum()
    }
}

/// Image coordinates along one axis: `(coordinate, hits on the 0 wall, hits
/// on the L wall)`.
fn axis_images(src: f64, len: f64, max_order: usize) -> Vec<(f64, u32, u32)> {
    let reach = max_order as i64 / 2 + 1;
    let mut out = Vec::new();
    for n in -reach..=reach {
        for q in 0..=1i64 {
            let low = (n - q).unsigned_abs() as u32;
            let high = n.unsigned_abs() as u32;
            if (low + high) as usize <= max_order {
                out.push(((1 - 2 * q) as f64 * src + 2.0 * n as f64 * len, low, high));
            }
        }
    }
    out
}

/// Every image source with non-zero amplitude up to the effective order.
pub fn image_sources(spec: &RoomSpec) -> Result<Vec<ImageSource>> {
    spec.validate()?;
    let order = spec.effective_order();
    let axes: Vec<Vec<(f64, u32, u32)>> = (0..3)
        .map(|a| axis_images(spec.source[a], spec.dimensions[a], order))
        .collect();
    let beta = &spec.reflectivity;

    let mut images = Vec::new();
    for &(x, x0, x1) in &axes[0] {
        let ox = (x0 + x1) as usize;
        let gx = beta[0].powi(x0 as i32) * beta[1].powi(x1 as i32);
        for &(y, y0, y1) in &axes[1] {
            let oy = ox + (y0 + y1) as usize;
            if oy > order {
                continue;
            }
            let gy = gx * beta[2].powi(y0 as i32) * beta[3].powi(y1 as i32);
            for &(z, z0, z1) in &axes[2] {
                if oy + (z0 + z1) as usize > order {
                    continue;
                }
                let gain = gy * beta[4].powi(z0 as i32) * beta[5].powi(z1 as i32);
                if gain == 0.0 {
                    continue;
                }
                let position = [x, y, z];
                let d = distance(position, spec.mic);
                images.push(ImageSource {
                    position,
                    reflections: [x0, x1, y0, y1, z0, z1],
                    distance: d,
                    delay_s: d / spec.speed_of_sound,
                    amplitude: gain / (4.0 * PI * d),
                });
            }
        }
    }
    Ok(images)
}

/// Adds a band-limited impulse at fractional sample position `pos`.
fn add_windowed_sinc(out: &mut [f64], pos: f64, amplitude: f64) {
    let base = pos.floor();
    let frac = pos - base;
    let base = base as i64;
    let half = SINC_HALF_TAPS as f64 + 1.0;
    // sin(π(k - f)) = -(-1)^k sin(πf); the Hann term uses angle addition
    let sin_pf = (PI * frac).sin();
    let (sin_wf, cos_wf) = (PI * frac / half).sin_cos();
    for k in -SINC_HALF_TAPS..=SINC_HALF_TAPS {
        let idx = base + k;
        if idx < 0 || idx as usize >= out.len() {
            continue;
        }
        let x = k as f64 - frac;
        let sinc = if x == 0.0 {
            1.0
        } else {
            let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
            sign * sin_pf / (PI * x)
        };
        let (sin_wk, cos_wk) = (PI * k as f64 / half).sin_cos();
        let cos_wx = cos_wk * cos_wf + sin_wk * sin_wf;
        out[idx as usize] += amplitude * sinc * 0.5 * (1.0 + cos_wx);
    }
}

pub fn simulate_rir(spec: &RoomSpec, rir_id: &str) -> Result<ImpulseResponse> {
    let images = image_sources(spec)?;
    let fs = spec.sample_rate as f64;
    let longest = images.iter().map(|i| i.delay_s).fold(0.0, f64::max);
    let seconds = longest + TAIL_SECONDS;
    if seconds > MAX_SECONDS {
        return Err(Error::invalid(format!(
            "order {} needs a {seconds:.1} s response, over the {MAX_SECONDS} s cap",
            spec.effective_order()
        )));
    }
    let len = (seconds * fs).ceil() as usize + SINC_HALF_TAPS as usize + 1;
    let mut h = vec![0.0; len];
    for img in &images {
        add_windowed_sinc(&mut h, img.delay_s * fs, img.amplitude);
    }
    let wave = Waveform::new(h, spec.sample_rate, rir_id)?;
    ImpulseResponse::new(wave, rir_id, RirKind::Simulated)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomRanges {
    pub length: (f64, f64),
    pub width: (f64, f64),
    pub height: (f64, f64),
    pub reflectivity: (f64, f64),
    /// Minimum source/mic distance from every wall.
    pub wall_clearance: f64,
    pub min_separation: f64,
    pub sample_rate: u32,
    pub speed_of_sound: f64,
}

impl Default for RoomRanges {
    fn default() -> Self {
        Self {
            length: (3.0, 10.0),
            width: (3.0, 10.0),
            height: (2.5, 4.5),
            reflectivity: (0.7, 0.95),
            wall_clearance: 0.5,
            min_separation: 0.3,
            sample_rate: 16000,
            speed_of_sound: DEFAULT_SPEED_OF_SOUND,
        }
    }
}

const PLACEMENT_TRIES: usize = 1000;

pub fn sample_rooms<R: Rng + ?Sized>(rng: &mut R, count: usize, ranges: &RoomRanges) -> Result<Vec<RoomSpec>> {
    if count == 0 {
        return Err(Error::invalid("room count must be at least 1"));
    }
    let dims = [ranges.length, ranges.width, ranges.height];
    for (lo, hi) in dims {
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::invalid(format!("bad dimension range [{lo}, {hi}]")));
        }
        if lo <= 2.0 * ranges.wall_clearance {
            return Err(Error::invalid(format!(
                "dimension {lo} m cannot keep {} m clearance from both walls",
                ranges.wall_clearance
            )));
        }
    }
    let (b_lo, b_hi) = ranges.reflectivity;
    if !(0.0 <= b_lo && b_lo <= b_hi && b_hi < 1.0) {
        return Err(Error::invalid(format!("bad reflectivity range [{b_lo}, {b_hi}]")));
    }

    let mut rooms = Vec::with_capacity(count);
    for _ in 0..count {
        let dimensions = dims.map(|(lo, hi)| rng.gen_range(lo..=hi));
        let reflectivity = [(); 6].map(|_| rng.gen_range(b_lo..=b_hi));
        let c = ranges.wall_clearance;
        let place = |rng: &mut R| dimensions.map(|l| rng.gen_range(c..=l - c));
        let mut placed = None;
        for _ in 0..PLACEMENT_TRIES {
            let source = place(rng);
            let mic = place(rng);
            if distance(source, mic) >= ranges.min_separation {
                placed = Some((source, mic));
                break;
            }
        }
        let (source, mic) = placed.ok_or_else(|| {
            Error::invalid(format!("could not separate source and mic by {} m", ranges.min_separation))
        })?;
        rooms.push(RoomSpec {
            dimensions,
            source,
            mic,
            reflectivity,
            max_order: None,
            sample_rate: ranges.sample_rate,
            speed_of_sound: ranges.speed_of_sound,
        });
    }
    Ok(rooms)
}
