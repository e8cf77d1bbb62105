//! JSON map files.
//!
//! ```json
//! {"format_version": 1, "order": 16, "label_count": 25, "cells": [[...]],
//!  "meta": {"fade": {"re": 0.5, "im": 0.5}, "method": "cartesian",
//!           "signal_set": {"lambda": 2, "labeling": "gray"}}}
//! ```
//!
//! Floats are written with shortest round-trip formatting, so reading a file
//! and writing it again reproduces the same bytes.

use serde::{Deserialize, Serialize};

use crate::constellation::{Labeling, SignalSet};
use crate::fadestates::FadeState;
use crate::latin::LatinSquare;
use crate::mapgen::MapMethod;
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalSetMeta {
    pub lambda: u32,
    pub labeling: Labeling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapMeta {
    pub fade: FadeState,
    pub method: MapMethod,
    pub signal_set: SignalSetMeta,
}

/// On-disk representation of a relay map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapFile {
    pub format_version: u32,
    pub order: usize,
    pub label_count: usize,
    pub cells: Vec<Vec<u32>>,
    pub meta: MapMeta,
}

impl MapFile {
    pub fn new(square: &LatinSquare, fade: FadeState, method: MapMethod, set: &SignalSet) -> Self {
        MapFile {
            format_version: FORMAT_VERSION,
            order: square.order(),
            label_count: square.label_count(),
            cells: square.to_rows(),
            meta: MapMeta {
                fade,
                method,
                signal_set: SignalSetMeta { lambda: set.lambda(), labeling: set.labeling() },
            },
        }
    }

    /// Parses and checks the header against the cells. The Latin property is
    /// not checked here; see [`LatinSquare::validate`].
    pub fn from_json(text: &str) -> Result<Self> {
        let file: MapFile = serde_json::from_str(text).map_err(|e| Error::MapFile(e.to_string()))?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::MapFile(format!("unsupported format_version {}", file.format_version)));
        }
        let sq = file.square()?;
        if sq.order() != file.order {
            return Err(Error::MapFile(format!("order {} does not match {} rows", file.order, sq.order())));
        }
        if sq.label_count() != file.label_count {
            return Err(Error::MapFile(format!(
                "label_count {} does not match the {} labels used",
                file.label_count,
                sq.label_count()
            )));
        }
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("map files always serialize")
    }

    pub fn square(&self) -> Result<LatinSquare> {
        LatinSquare::from_rows(&self.cells).map_err(|e| Error::MapFile(e.to_string()))
    }

    pub fn signal_set(&self) -> Result<SignalSet> {
        SignalSet::new(self.meta.signal_set.lambda)
    }
}
