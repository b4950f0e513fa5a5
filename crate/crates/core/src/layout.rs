//! Layout domain types and the fixed-shape tensor encoding used as diffusion state.
//!
//! A [`Layout`] is an ordered list of flat components on a unit canvas. The
//! [`LayoutTensor`] packs up to [`N_MAX`] components into a `16 × 16` matrix whose
//! rows are component slots and whose columns are:
//!
//! | columns | content                                   |
//! |---------|-------------------------------------------|
//! | 0..8    | component type, one-hot scaled to `±1`    |
//! | 8..12   | `cx, cy, w, h` mapped from `[0,1]` to `[-1,1]` |
//! | 12..15  | `r, g, b` mapped from `[0,1]` to `[-1,1]` |
//! | 15      | presence flag (`+1` visible, `-1` hidden or empty) |

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum number of components in a layout.
pub const N_MAX: usize = 16;
/// Width of one encoded component row.
pub const ROW_DIM: usize = 16;
/// Number of component classes.
pub const NUM_TYPES: usize = 8;
/// Minimum width/height of a visible decoded component.
pub const MIN_SIZE: f64 = 0.02;
/// Default raster size in pixels (width, height).
pub const DEFAULT_CANVAS: (u32, u32) = (144, 256);

pub const COL_CX: usize = 8;
pub const COL_CY: usize = 9;
pub const COL_W: usize = 10;
pub const COL_H: usize = 11;
pub const COL_R: usize = 12;
pub const COL_PRESENCE: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentType {
    Background = 0,
    Text = 1,
    Image = 2,
    Button = 3,
    Input = 4,
    Icon = 5,
    ListItem = 6,
    Other = 7,
}

impl ComponentType {
    pub const ALL: [ComponentType; NUM_TYPES] = [
        ComponentType::Background,
        ComponentType::Text,
        ComponentType::Image,
        ComponentType::Button,
        ComponentType::Input,
        ComponentType::Icon,
        ComponentType::ListItem,
        ComponentType::Other,
    ];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: usize) -> Option<Self> {
        Self::ALL.get(id).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ComponentType::Background => "background",
            ComponentType::Text => "text",
            ComponentType::Image => "image",
            ComponentType::Button => "button",
            ComponentType::Input => "input",
            ComponentType::Icon => "icon",
            ComponentType::ListItem => "list_item",
            ComponentType::Other => "other",
        }
    }
}

impl fmt::Display for ComponentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ComponentType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown component type `{s}`")))
    }
}

fn default_visible() -> bool {
    true
}

/// One flat UI component. Geometry is in canvas-normalized units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    #[serde(rename = "type")]
    pub ctype: ComponentType,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub color: [f64; 3],
    #[serde(default = "default_visible")]
    pub visible: bool,
}

impl Component {
    pub fn new(ctype: ComponentType, cx: f64, cy: f64, w: f64, h: f64, color: [f64; 3]) -> Self {
        Self {
            ctype,
            cx,
            cy,
            w,
            h,
            color,
            visible: true,
        }
    }

    /// Builds a component from its edges.
    pub fn from_edges(
        ctype: ComponentType,
        left: f64,
        top: f64,
        right: f64,
        bottom: f64,
        color: [f64; 3],
    ) -> Self {
        Self::new(
            ctype,
            0.5 * (left + right),
            0.5 * (top + bottom),
            right - left,
            bottom - top,
            color,
        )
    }

    pub fn left(&self) -> f64 {
        self.cx - 0.5 * self.w
    }

    pub fn right(&self) -> f64 {
        self.cx + 0.5 * self.w
    }

    pub fn top(&self) -> f64 {
        self.cy - 0.5 * self.h
    }

    pub fn bottom(&self) -> f64 {
        self.cy + 0.5 * self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn is_background(&self) -> bool {
        self.ctype == ComponentType::Background
    }

    fn check(&self, index: usize) -> Result<()> {
        let bad = |what: &str| {
            Err(Error::InvalidArgument(format!(
                "component {index}: {what} out of range"
            )))
        };
        let unit = |v: f64| v.is_finite() && (0.0..=1.0).contains(&v);
        if !unit(self.cx) || !unit(self.cy) {
            return bad("center");
        }
        if !unit(self.w) || !unit(self.h) || (self.visible && (self.w <= 0.0 || self.h <= 0.0)) {
            return bad("size");
        }
        if !self.color.iter().all(|&c| unit(c)) {
            return bad("color");
        }
        Ok(())
    }
}

/// Ordered list of components; later components draw over earlier ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    #[serde(default = "default_canvas")]
    pub canvas: (u32, u32),
    pub components: Vec<Component>,
}

fn default_canvas() -> (u32, u32) {
    DEFAULT_CANVAS
}

impl Default for Layout {
    fn default() -> Self {
        Self::new(Vec::new())
    }
}

impl Layout {
    pub fn new(components: Vec<Component>) -> Self {
        Self {
            canvas: DEFAULT_CANVAS,
            components,
        }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn visible(&self) -> impl Iterator<Item = &Component> {
        self.components.iter().filter(|c| c.visible)
    }

    /// Checks the component-count, geometry and color invariants.
    pub fn validate(&self) -> Result<()> {
        if self.components.len() > N_MAX {
            return Err(Error::TooManyComponents {
                count: self.components.len(),
                max: N_MAX,
            });
        }
        if self.canvas.0 == 0 || self.canvas.1 == 0 {
            return Err(Error::InvalidArgument("canvas must be non-empty".into()));
        }
        for (i, c) in self.components.iter().enumerate() {
            c.check(i)?;
        }
        Ok(())
    }

    /// Drops trailing hidden components. Decoding always yields this form.
    pub fn trimmed(&self) -> Layout {
        let keep = self
            .components
            .iter()
            .rposition(|c| c.visible)
            .map_or(0, |i| i + 1);
        Layout {
            canvas: self.canvas,
            components: self.components[..keep].to_vec(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("layout serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("layout serializes")
    }

    pub fn from_json(s: &str) -> Result<Layout> {
        let de = &mut serde_json::Deserializer::from_str(s);
        let layout: Layout = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        layout.validate()?;
        Ok(layout)
    }
}

/// Fixed-shape `N_MAX × ROW_DIM` encoding of a layout, all entries nominally in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayoutTensor(Array2<f64>);

impl LayoutTensor {
    pub fn zeros() -> Self {
        Self(Array2::zeros((N_MAX, ROW_DIM)))
    }

    pub fn from_array(data: Array2<f64>) -> Result<Self> {
        if data.dim() != (N_MAX, ROW_DIM) {
            return Err(Error::Shape {
                expected: (N_MAX, ROW_DIM),
                got: data.dim(),
            });
        }
        Ok(Self(data))
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn as_array_mut(&mut self) -> &mut Array2<f64> {
        &mut self.0
    }

    pub fn into_array(self) -> Array2<f64> {
        self.0
    }
}

#[inline]
fn to_signed(v: f64) -> f64 {
    2.0 * v - 1.0
}

#[inline]
fn to_unit(v: f64) -> f64 {
    0.5 * (v.clamp(-1.0, 1.0) + 1.0)
}

/// Encodes a layout into its tensor form. Empty slots carry presence `-1` and zeros elsewhere.
pub fn encode(layout: &Layout) -> Result<LayoutTensor> {
    if layout.components.len() > N_MAX {
        return Err(Error::TooManyComponents {
            count: layout.components.len(),
            max: N_MAX,
        });
    }
    let mut x = Array2::zeros((N_MAX, ROW_DIM));
    for slot in 0..N_MAX {
        x[[slot, COL_PRESENCE]] = -1.0;
    }
    for (slot, c) in layout.components.iter().enumerate() {
        let mut row = x.row_mut(slot);
        for k in 0..NUM_TYPES {
            row[k] = if k == c.ctype.id() { 1.0 } else { -1.0 };
        }
        row[COL_CX] = to_signed(c.cx);
        row[COL_CY] = to_signed(c.cy);
        row[COL_W] = to_signed(c.w);
        row[COL_H] = to_signed(c.h);
        for k in 0..3 {
            row[COL_R + k] = to_signed(c.color[k]);
        }
        row[COL_PRESENCE] = if c.visible { 1.0 } else { -1.0 };
    }
    Ok(LayoutTensor(x))
}

/// Decodes one slot. Continuous entries are clamped to `[-1,1]` before the inverse map.
pub fn decode_row(tensor: &LayoutTensor, slot: usize) -> Component {
    let row = tensor.0.row(slot);
    let mut best = 0;
    for k in 1..NUM_TYPES {
        if row[k] > row[best] {
            best = k;
        }
    }
    let visible = row[COL_PRESENCE] > 0.0;
    let mut w = to_unit(row[COL_W]);
    let mut h = to_unit(row[COL_H]);
    if visible {
        w = w.max(MIN_SIZE);
        h = h.max(MIN_SIZE);
    }
    Component {
        ctype: ComponentType::ALL[best],
        cx: to_unit(row[COL_CX]),
        cy: to_unit(row[COL_CY]),
        w,
        h,
        color: [
            to_unit(row[COL_R]),
            to_unit(row[COL_R + 1]),
            to_unit(row[COL_R + 2]),
        ],
        visible,
    }
}

/// Decodes a tensor. Slots up to the last present one are kept so that component
/// indices match slot indices; trailing non-present slots are dropped.
pub fn decode(tensor: &LayoutTensor) -> Layout {
    decode_min_len(tensor, 0)
}

/// Like [`decode`] but always emits at least `min_len` slots.
pub fn decode_min_len(tensor: &LayoutTensor, min_len: usize) -> Layout {
    let last_present = (0..N_MAX)
        .rev()
        .find(|&s| tensor.0[[s, COL_PRESENCE]] > 0.0)
        .map_or(0, |s| s + 1);
    let len = last_present.max(min_len.min(N_MAX));
    Layout::new((0..len).map(|s| decode_row(tensor, s)).collect())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    fn button() -> Component {
        Component::new(ComponentType::Button, 0.5, 0.9, 0.8, 0.07, [0.2, 0.4, 0.9])
    }

    #[test]
    fn type_ids_are_stable() {
        for (i, t) in ComponentType::ALL.iter().enumerate() {
            assert_eq!(t.id(), i);
            assert_eq!(t.name().parse::<ComponentType>().unwrap(), *t);
        }
        assert_eq!(ComponentType::ListItem.name(), "list_item");
    }

    #[test]
    fn empty_layout_encodes_to_absent_slots() {
        let x = encode(&Layout::default()).unwrap();
        for s in 0..N_MAX {
            assert_eq!(x.as_array()[[s, COL_PRESENCE]], -1.0);
            for k in 0..COL_PRESENCE {
                assert_eq!(x.as_array()[[s, k]], 0.0);
            }
        }
    }

    #[test]
    fn centered_button_maps_to_zero() {
        let x = encode(&Layout::new(vec![button()])).unwrap();
        assert_eq!(x.as_array()[[0, COL_PRESENCE]], 1.0);
        assert_eq!(x.as_array()[[0, COL_CX]], 0.0);
        assert_eq!(x.as_array()[[0, ComponentType::Button.id()]], 1.0);
        assert_eq!(x.as_array()[[0, ComponentType::Text.id()]], -1.0);
    }

    #[test]
    fn too_many_components_rejected() {
        let layout = Layout::new(vec![button(); N_MAX + 1]);
        assert!(matches!(
            encode(&layout),
            Err(Error::TooManyComponents { count: 17, .. })
        ));
    }

    #[test]
    fn zero_tensor_decodes_empty() {
        assert!(decode(&LayoutTensor::zeros()).is_empty());
    }

    #[test]
    fn argmax_tie_breaks_to_lowest_id() {
        let mut x = LayoutTensor::zeros();
        x.as_array_mut()[[0, 3]] = 1.0;
        x.as_array_mut()[[0, 0]] = 1.0;
        x.as_array_mut()[[0, COL_PRESENCE]] = 1.0;
        assert_eq!(decode(&x).components[0].ctype, ComponentType::Background);
    }

    #[test]
    fn out_of_range_entry_is_clamped() {
        let mut x = LayoutTensor::zeros();
        x.as_array_mut()[[0, COL_CX]] = 1.7;
        x.as_array_mut()[[0, COL_PRESENCE]] = 0.3;
        assert_eq!(decode(&x).components[0].cx, 1.0);
    }

    #[test]
    fn visible_sizes_respect_minimum() {
        let mut x = LayoutTensor::zeros();
        x.as_array_mut()[[0, COL_W]] = -1.0;
        x.as_array_mut()[[0, COL_H]] = -0.99;
        x.as_array_mut()[[0, COL_PRESENCE]] = 1.0;
        let c = decode(&x).components[0];
        assert_eq!(c.w, MIN_SIZE);
        assert_eq!(c.h, MIN_SIZE);
    }

    #[test]
    fn hidden_slots_before_present_ones_keep_indices() {
        let mut hidden = button();
        hidden.visible = false;
        let layout = Layout::new(vec![hidden, button()]);
        let back = decode(&encode(&layout).unwrap());
        assert_eq!(back.len(), 2);
        assert!(!back.components[0].visible);
        assert!(back.components[1].visible);
    }

    #[test]
    fn shape_mismatch_rejected() {
        assert!(LayoutTensor::from_array(Array2::zeros((16, 15))).is_err());
    }

    #[test]
    fn canonical_json_shape() {
        let json = Layout::new(vec![button()]).to_json();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["canvas"], serde_json::json!([144, 256]));
        assert_eq!(v["components"][0]["type"], "button");
        assert_eq!(v["components"][0]["visible"], true);
        let parsed = Layout::from_json(
            r#"{"canvas":[144,256],"components":[{"type":"button","cx":0.5,"cy":0.9,"w":0.8,"h":0.07,"color":[0.2,0.4,0.9],"visible":true}]}"#,
        )
        .unwrap();
        assert_eq!(parsed, Layout::new(vec![button()]));
    }

    #[test]
    fn json_errors_carry_path() {
        let err = Layout::from_json(r#"{"components":[{"type":"bogus"}]}"#).unwrap_err();
        match err {
            Error::Parse { path, .. } => assert!(path.starts_with("components[0]"), "{path}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    pub(crate) fn arb_component() -> impl Strategy<Value = Component> {
        (
            0usize..NUM_TYPES,
            0.0f64..=1.0,
            0.0f64..=1.0,
            MIN_SIZE..=1.0,
            MIN_SIZE..=1.0,
            prop::array::uniform3(0.0f64..=1.0),
            prop::bool::weighted(0.85),
        )
            .prop_map(|(t, cx, cy, w, h, color, visible)| Component {
                ctype: ComponentType::ALL[t],
                cx,
                cy,
                w,
                h,
                color,
                visible,
            })
    }

    proptest! {
        #[test]
        fn round_trip(components in prop::collection::vec(arb_component(), 0..=N_MAX)) {
            let layout = Layout::new(components);
            let x = encode(&layout).unwrap();
            prop_assert!(x.as_array().iter().all(|v| (-1.0..=1.0).contains(v)));
            let back = decode(&x);
            let expected = layout.trimmed();
            prop_assert_eq!(back.len(), expected.len());
            for (a, b) in back.components.iter().zip(&expected.components) {
                prop_assert_eq!(a.ctype, b.ctype);
                prop_assert_eq!(a.visible, b.visible);
                for (u, v) in [a.cx, a.cy, a.w, a.h].iter().zip([b.cx, b.cy, b.w, b.h]) {
                    prop_assert!((u - v).abs() < 1e-6);
                }
                for k in 0..3 {
                    prop_assert!((a.color[k] - b.color[k]).abs() < 1e-6);
                }
            }
        }

        #[test]
        fn json_round_trip(components in prop::collection::vec(arb_component(), 0..=N_MAX)) {
            let layout = Layout::new(components);
            let back = Layout::from_json(&layout.to_json()).unwrap();
            prop_assert_eq!(back, layout);
        }
    }
}
