//! A common interface over the five detectors.

use std::fmt;
use std::str::FromStr;

use crate::chromacity::{classify_chromacity, ChromacityParams};
use crate::config::BenchConfig;
use crate::error::{Error, Result};
use crate::geometry::{classify_geometry_frame, GeometryParams};
use crate::imaging::raster::{BinaryMask, Frame, TriMask};
use crate::physical::PhysicalDetector;
use crate::texture_lr::{classify_texture_lr, LrParams};
use crate::texture_sr::{classify_texture_sr_frame, GaborBank, SrParams};

/// Labels the foreground of one frame as Object or Shadow.
///
/// Detectors may keep state between frames, so frames of a sequence must be
/// fed in order to one instance.
pub trait ShadowDetector: Send {
    fn detect(&mut self, frame: &Frame, background: &Frame, foreground: &BinaryMask) -> Result<TriMask>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Chromacity,
    Physical,
    Geometry,
    SrTexture,
    LrTexture,
    /// SR texture with the reduced kernel bank.
    SrTextureFast,
}

impl Method {
    /// The five methods compared in reports.
    pub const FIVE: [Method; 5] = [
        Method::Chromacity,
        Method::Physical,
        Method::Geometry,
        Method::SrTexture,
        Method::LrTexture,
    ];

    pub const ALL: [Method; 6] = [
        Method::Chromacity,
        Method::Physical,
        Method::Geometry,
        Method::SrTexture,
        Method::LrTexture,
        Method::SrTextureFast,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Chromacity => "chromacity",
            Method::Physical => "physical",
            Method::Geometry => "geometry",
            Method::SrTexture => "sr-texture",
            Method::LrTexture => "lr-texture",
            Method::SrTextureFast => "sr-texture-fast",
        }
    }

    pub fn build(self, config: &BenchConfig) -> Result<Box<dyn ShadowDetector>> {
        Ok(match self {
            Method::Chromacity => Box::new(Chromacity(config.chromacity.clone())),
            Method::Physical => Box::new(PhysicalDetector::new(config.physical.clone())?),
            Method::Geometry => Box::new(Geometry(config.geometry.clone())),
            Method::SrTexture => Box::new(SrTexture::new(config.sr.clone())?),
            Method::SrTextureFast => Box::new(SrTexture::new(SrParams {
                bank: config.sr_fast_bank.clone(),
                ..config.sr.clone()
            })?),
            Method::LrTexture => Box::new(LrTexture(config.lr.clone())),
        })
    }

    /// Parses a comma-separated list; `all` expands to the five methods.
    pub fn parse_list(list: &str) -> Result<Vec<Method>> {
        let mut out = Vec::new();
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            if item == "all" {
                out.extend(Method::FIVE);
            } else {
                out.push(item.parse()?);
            }
        }
        out.dedup();
        if out.is_empty() {
            return Err(Error::Config("no method selected".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

struct Chromacity(ChromacityParams);

impl ShadowDetector for Chromacity {
    fn detect(&mut self, frame: &Frame, background: &Frame, foreground: &BinaryMask) -> Result<TriMask> {
        classify_chromacity(frame, background, foreground, &self.0)
    }
}

impl ShadowDetector for PhysicalDetector {
    fn detect(&mut self, frame: &Frame, background: &Frame, foreground: &BinaryMask) -> Result<TriMask> {
        self.process(frame, background, foreground)
    }
}

struct Geometry(GeometryParams);

impl ShadowDetector for Geometry {
    fn detect(&mut self, frame: &Frame, _background: &Frame, foreground: &BinaryMask) -> Result<TriMask> {
        classify_geometry_frame(frame, foreground, &self.0)
    }
}

struct SrTexture {
    params: SrParams,
    bank: GaborBank,
}

impl SrTexture {
    fn new(params: SrParams) -> Result<Self> {
        let bank = GaborBank::build(&params.bank)?;
        Ok(Self { params, bank })
    }
}

impl ShadowDetector for SrTexture {
    fn detect(&mut self, frame: &Frame, background: &Frame, foreground: &BinaryMask) -> Result<TriMask> {
        classify_texture_sr_frame(frame, background, foreground, &self.bank, &self.params)
    }
}

struct LrTexture(LrParams);

impl ShadowDetector for LrTexture {
    fn detect(&mut self, frame: &Frame, background: &Frame, foreground: &BinaryMask) -> Result<TriMask> {
        classify_texture_lr(frame, background, foreground, &self.0)
    }
}
