//! Procedural chest phantoms.
//!
//! A phantom is a dim torso ellipse with two brighter lung ellipses.
//! Infected tissue is brightened further and is always drawn inside the
//! lungs: several small patches spread over both lungs for the covid-like
//! class, one large consolidation in one lung for the pneumonia-like class,
//! nothing for normal.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::metrics::BinaryMask;
use crate::rng::Rng;

const BACKGROUND: f64 = 0.05;
const TORSO: f64 = 0.25;
/// Lungs sit this much above the torso.
const LUNG_GAP: f64 = 0.3;
/// Infected pixels sit this much above healthy lung.
const INFECTION_BOOST: f64 = 0.2;
pub const PHANTOM_NOISE_STD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    CovidLike = 0,
    PneumoniaLike = 1,
    Normal = 2,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::CovidLike, Label::PneumoniaLike, Label::Normal];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: usize) -> Result<Self> {
        Self::ALL
            .get(id)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("class id {id} out of range 0..3")))
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::CovidLike => "covid",
            Label::PneumoniaLike => "pneumonia",
            Label::Normal => "normal",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Ok(id) = s.parse::<usize>() {
            return Self::from_id(id);
        }
        Self::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown label `{s}`")))
    }
}

/// One phantom: image, lung mask, infection mask and class.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: GrayImage,
    pub lung_mask: BinaryMask,
    pub inf_mask: BinaryMask,
    pub label: Label,
}

impl Sample {
    /// Checks the phantom invariants: equal dimensions, infection inside the
    /// lungs, and no infection for the normal class.
    pub fn validate(&self) -> Result<()> {
        let (w, h) = (self.image.width, self.image.height);
        if self.lung_mask.width() != w
            || self.lung_mask.height() != h
            || !self.lung_mask.same_dims(&self.inf_mask)
        {
            return Err(Error::Dataset("image and mask dimensions differ".into()));
        }
        if !self.inf_mask.is_subset_of(&self.lung_mask) {
            return Err(Error::Dataset(
                "infection mask extends outside the lung mask".into(),
            ));
        }
        if self.label == Label::Normal && !self.inf_mask.is_empty() {
            return Err(Error::Dataset(
                "normal sample has a non-empty infection mask".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Ellipse {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
    angle: f64,
}

impl Ellipse {
    fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.angle.sin_cos();
        let dx = x - self.cx;
        let dy = y - self.cy;
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.rx).powi(2) + (v / self.ry).powi(2) <= 1.0
    }

    fn rasterize(&self, hw: usize) -> BinaryMask {
        BinaryMask::from_fn(hw, hw, |x, y| self.contains(x as f64 + 0.5, y as f64 + 0.5))
    }
}

fn union(a: &BinaryMask, b: &BinaryMask) -> BinaryMask {
    BinaryMask::from_fn(a.width(), a.height(), |x, y| a.get(x, y) || b.get(x, y))
}

/// Picks a random lung pixel centre.
fn lung_point(lung: &BinaryMask, rng: &mut Rng) -> (f64, f64) {
    let pixels: Vec<(usize, usize)> = (0..lung.height())
        .flat_map(|y| (0..lung.width()).map(move |x| (x, y)))
        .filter(|&(x, y)| lung.get(x, y))
        .collect();
    let (x, y) = pixels[rng.int_range(0, pixels.len())];
    (x as f64 + 0.5, y as f64 + 0.5)
}

fn blob(center: (f64, f64), radius: f64, rng: &mut Rng) -> Ellipse {
    Ellipse {
        cx: center.0,
        cy: center.1,
        rx: radius * rng.uniform_range(0.8, 1.2),
        ry: radius * rng.uniform_range(0.8, 1.2),
        angle: rng.uniform_range(0.0, std::f64::consts::PI),
    }
}

/// Draws one phantom of class `label` at `hw x hw`.
pub fn generate_phantom(rng: &mut Rng, label: Label, hw: usize) -> Result<Sample> {
    if hw < 32 {
        return Err(Error::InvalidArgument(format!(
            "phantom size {hw} is below the minimum of 32"
        )));
    }
    let s = hw as f64;
    let jitter = |rng: &mut Rng, frac: f64| rng.uniform_range(-frac, frac) * s;

    let torso = Ellipse {
        cx: s * 0.5 + jitter(rng, 0.02),
        cy: s * 0.52 + jitter(rng, 0.02),
        rx: s * rng.uniform_range(0.40, 0.46),
        ry: s * rng.uniform_range(0.42, 0.47),
        angle: 0.0,
    };
    let mut lungs = Vec::with_capacity(2);
    for side in [-1.0, 1.0] {
        lungs.push(Ellipse {
            cx: s * (0.5 + side * rng.uniform_range(0.17, 0.21)),
            cy: s * 0.5 + jitter(rng, 0.04),
            rx: s * rng.uniform_range(0.11, 0.14),
            ry: s * rng.uniform_range(0.24, 0.30),
            angle: side * rng.uniform_range(0.0, 0.15),
        });
    }
    let left = lungs[0].rasterize(hw);
    let right = lungs[1].rasterize(hw);
    let lung_mask = union(&left, &right);

    let mut inf_mask = BinaryMask::empty(hw, hw);
    match label {
        Label::Normal => {}
        Label::CovidLike => {
            let patches = rng.int_range(4, 8);
            for k in 0..patches {
                let side = if k % 2 == 0 { &left } else { &right };
                let c = lung_point(side, rng);
                let r = s * rng.uniform_range(0.025, 0.04);
                inf_mask = union(&inf_mask, &blob(c, r, rng).rasterize(hw));
            }
        }
        Label::PneumoniaLike => {
            let lung = lungs[rng.int_range(0, 2)];
            let c = (
                lung.cx + rng.uniform_range(-0.4, 0.4) * lung.rx,
                lung.cy + rng.uniform_range(-0.4, 0.4) * lung.ry,
            );
            let r = s * rng.uniform_range(0.14, 0.18);
            inf_mask = blob(c, r, rng).rasterize(hw);
        }
    }
    inf_mask = inf_mask.and(&lung_mask);

    let mut pixels = Vec::with_capacity(hw * hw);
    for y in 0..hw {
        for x in 0..hw {
            let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
            let mut v = if torso.contains(fx, fy) {
                TORSO
            } else {
                BACKGROUND
            };
            if lung_mask.get(x, y) {
                v = TORSO + LUNG_GAP;
            }
            if inf_mask.get(x, y) {
                v += INFECTION_BOOST;
            }
            v += rng.normal(0.0, PHANTOM_NOISE_STD);
            pixels.push(v.clamp(0.0, 1.0));
        }
    }

    let sample = Sample {
        image: GrayImage::new(hw, hw, pixels)?,
        lung_mask,
        inf_mask,
        label,
    };
    sample.validate()?;
    Ok(sample)
}
