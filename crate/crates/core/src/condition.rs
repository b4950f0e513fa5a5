//! Text-keyword and sketch-grid conditioning.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::Layout;

/// Version tag of [`VOCABULARY`]; bump whenever the word list changes.
pub const VOCAB_VERSION: u32 = 1;
pub const VOCAB_SIZE: usize = 32;
pub const SKETCH_SIDE: usize = 8;
pub const SKETCH_CELLS: usize = SKETCH_SIDE * SKETCH_SIDE;
/// Length of the encoded condition vector.
pub const COND_DIM: usize = VOCAB_SIZE + SKETCH_CELLS;

pub const VOCABULARY: [&str; VOCAB_SIZE] = [
    "app", "screen", "form", "sign", "login", "password", "email", "list", "feed", "grid",
    "gallery", "dark", "light", "photo", "image", "toolbar", "menu", "search", "settings",
    "profile", "button", "text", "header", "footer", "card", "shop", "cart", "chat", "message",
    "video", "map", "content",
];

pub fn vocab_index(word: &str) -> Option<usize> {
    VOCABULARY.iter().position(|w| *w == word)
}

/// Keyword bag plus an `8 × 8` occupancy sketch in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    keywords: [bool; VOCAB_SIZE],
    sketch: [f64; SKETCH_CELLS],
}

impl Default for Condition {
    fn default() -> Self {
        Self {
            keywords: [false; VOCAB_SIZE],
            sketch: [0.0; SKETCH_CELLS],
        }
    }
}

impl Condition {
    /// Lowercases and whitespace-tokenizes `prompt`; words outside the vocabulary are ignored.
    /// A missing sketch is the all-zero grid.
    pub fn encode(prompt: &str, sketch: Option<&[f64]>) -> Result<Self> {
        let mut cond = Condition::default();
        for token in prompt.split_whitespace() {
            let token = token
                .trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase();
            if let Some(i) = vocab_index(&token) {
                cond.keywords[i] = true;
            }
        }
        if let Some(grid) = sketch {
            cond.set_sketch(grid)?;
        }
        Ok(cond)
    }

    pub fn from_words<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        let mut cond = Condition::default();
        for w in words {
            if let Some(i) = vocab_index(w) {
                cond.keywords[i] = true;
            }
        }
        cond
    }

    pub fn set_sketch(&mut self, grid: &[f64]) -> Result<()> {
        if grid.len() != SKETCH_CELLS {
            return Err(Error::InvalidArgument(format!(
                "sketch must have {SKETCH_CELLS} cells, got {}",
                grid.len()
            )));
        }
        if let Some(v) = grid.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!(
                "sketch value {v} outside [0, 1]"
            )));
        }
        self.sketch.copy_from_slice(grid);
        Ok(())
    }

    pub fn with_sketch_of(mut self, layout: &Layout) -> Self {
        self.sketch = sketch_from_layout(layout);
        self
    }

    pub fn keywords(&self) -> &[bool; VOCAB_SIZE] {
        &self.keywords
    }

    pub fn words(&self) -> Vec<&'static str> {
        VOCABULARY
            .iter()
            .zip(&self.keywords)
            .filter(|(_, on)| **on)
            .map(|(w, _)| *w)
            .collect()
    }

    pub fn sketch(&self) -> &[f64; SKETCH_CELLS] {
        &self.sketch
    }

    /// Dense vector `c`: keyword bits as 0/1 followed by the row-major sketch.
    pub fn vector(&self) -> [f64; COND_DIM] {
        let mut c = [0.0; COND_DIM];
        for (dst, on) in c.iter_mut().zip(&self.keywords) {
            *dst = if *on { 1.0 } else { 0.0 };
        }
        c[VOCAB_SIZE..].copy_from_slice(&self.sketch);
        c
    }
}

/// Serialized form: keyword words plus sketch cells.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionRecord {
    pub keywords: Vec<String>,
    pub sketch: Vec<f64>,
}

impl From<&Condition> for ConditionRecord {
    fn from(c: &Condition) -> Self {
        Self {
            keywords: c.words().into_iter().map(String::from).collect(),
            sketch: c.sketch.to_vec(),
        }
    }
}

impl TryFrom<ConditionRecord> for Condition {
    type Error = Error;

    fn try_from(r: ConditionRecord) -> Result<Self> {
        let mut c = Condition::from_words(r.keywords.iter().map(String::as_str));
        c.set_sketch(&r.sketch)?;
        Ok(c)
    }
}

/// Fraction of each sketch cell covered by visible non-background components, capped at 1.
pub fn sketch_from_layout(layout: &Layout) -> [f64; SKETCH_CELLS] {
    let mut grid = [0.0; SKETCH_CELLS];
    let cell = 1.0 / SKETCH_SIDE as f64;
    for c in layout.visible().filter(|c| !c.is_background()) {
        for row in 0..SKETCH_SIDE {
            let (y0, y1) = (row as f64 * cell, (row + 1) as f64 * cell);
            let oy = (c.bottom().min(y1) - c.top().max(y0)).max(0.0);
            if oy == 0.0 {
                continue;
            }
            for col in 0..SKETCH_SIDE {
                let (x0, x1) = (col as f64 * cell, (col + 1) as f64 * cell);
                let ox = (c.right().min(x1) - c.left().max(x0)).max(0.0);
                grid[row * SKETCH_SIDE + col] += ox * oy / (cell * cell);
            }
        }
    }
    for v in &mut grid {
        *v = v.min(1.0);
    }
    grid
}
