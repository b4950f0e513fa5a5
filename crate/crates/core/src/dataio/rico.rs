//! RICO-style view hierarchies: `{"bounds": [l, t, r, b], "componentLabel" | "class": ..., "children": [...]}`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use log::warn;
use serde::Deserialize;
use serde_json::Value;

use super::{Corpus, CorpusItem, Provenance};
use crate::condition::{vocab_index, Condition};
use crate::error::{Error, Result};
use crate::layout::{Component, ComponentType, Layout, N_MAX};

const BUILTIN_LABELS: &str = include_str!("../../data/rico_labels.json");

/// Label → component type table.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    version: u32,
    labels: HashMap<String, ComponentType>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelFile {
    version: u32,
    labels: HashMap<String, ComponentType>,
}

impl LabelMap {
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_LABELS).expect("bundled label table is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: LabelFile = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        Ok(Self {
            version: file.version,
            labels: file.labels,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    /// Exact label first, then the last `.`-separated segment of a class name, else `other`.
    pub fn lookup(&self, label: &str) -> ComponentType {
        if let Some(t) = self.labels.get(label) {
            return *t;
        }
        label
            .rsplit('.')
            .next()
            .and_then(|short| self.labels.get(short))
            .copied()
            .unwrap_or(ComponentType::Other)
    }
}

fn default_color(t: ComponentType) -> [f64; 3] {
    match t {
        ComponentType::Background => [0.98, 0.98, 0.98],
        ComponentType::Text => [0.13, 0.13, 0.13],
        ComponentType::Image => [0.62, 0.7, 0.78],
        ComponentType::Button => [0.16, 0.46, 0.82],
        ComponentType::Input => [0.9, 0.9, 0.92],
        ComponentType::Icon => [0.4, 0.4, 0.45],
        ComponentType::ListItem => [0.95, 0.95, 0.96],
        ComponentType::Other => [0.55, 0.55, 0.6],
    }
}

fn parse_color(v: &Value) -> Option<[f64; 3]> {
    match v {
        Value::String(s) => {
            let hex = s.strip_prefix('#')?;
            if hex.len() != 6 {
                return None;
            }
            let byte = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).ok();
            Some([
                byte(0)? as f64 / 255.0,
                byte(2)? as f64 / 255.0,
                byte(4)? as f64 / 255.0,
            ])
        }
        Value::Array(items) if items.len() == 3 => {
            let mut rgb = [0.0; 3];
            for (dst, item) in rgb.iter_mut().zip(items) {
                *dst = item.as_f64().filter(|x| x.is_finite() && *x >= 0.0)?;
            }
            if rgb.iter().any(|x| *x > 1.0) {
                if rgb.iter().any(|x| *x > 255.0) {
                    return None;
                }
                rgb.iter_mut().for_each(|x| *x /= 255.0);
            }
            Some(rgb)
        }
        _ => None,
    }
}

fn bounds(node: &Value) -> Option<[f64; 4]> {
    let arr = node.get("bounds")?.as_array()?;
    if arr.len() != 4 {
        return None;
    }
    let mut b = [0.0; 4];
    for (dst, v) in b.iter_mut().zip(arr) {
        *dst = v.as_f64().filter(|x| x.is_finite())?;
    }
    Some(b)
}

fn label(node: &Value) -> &str {
    ["componentLabel", "class_label", "class"]
        .iter()
        .find_map(|k| node.get(*k).and_then(Value::as_str))
        .unwrap_or("")
}

struct Leaf {
    component: Component,
    label: String,
}

fn collect_leaves(node: &Value, path: &str, screen: (f64, f64), map: &LabelMap, out: &mut Vec<Leaf>) {
    if !node.is_object() {
        warn!("{path}: node is not an object, dropped");
        return;
    }
    let Some([mut l, mut t, mut r, mut b]) = bounds(node) else {
        warn!("{path}: missing or malformed bounds, node dropped");
        return;
    };
    if node.get("visible-to-user").and_then(Value::as_bool) == Some(false) {
        return;
    }
    let children = node.get("children").and_then(Value::as_array);
    if let Some(kids) = children.filter(|k| !k.is_empty()) {
        for (i, child) in kids.iter().enumerate() {
            collect_leaves(child, &format!("{path}.children[{i}]"), screen, map, out);
        }
        return;
    }
    if l > r {
        std::mem::swap(&mut l, &mut r);
    }
    if t > b {
        std::mem::swap(&mut t, &mut b);
    }
    let (sw, sh) = screen;
    let (l, r) = ((l / sw).clamp(0.0, 1.0), (r / sw).clamp(0.0, 1.0));
    let (t, b) = ((t / sh).clamp(0.0, 1.0), (b / sh).clamp(0.0, 1.0));
    if r - l <= 0.0 || b - t <= 0.0 {
        return;
    }
    let name = label(node);
    let ctype = map.lookup(name);
    let color = node
        .get("color")
        .and_then(parse_color)
        .unwrap_or_else(|| default_color(ctype));
    out.push(Leaf {
        component: Component::from_edges(ctype, l, t, r, b, color),
        label: name.to_string(),
    });
}

/// Depth-first leaves of one parsed hierarchy, normalized by the screen size and
/// truncated to the `N_MAX` largest by area (document order kept).
pub fn parse_rico_value(doc: &Value, screen_px: (f64, f64), map: &LabelMap) -> Result<Layout> {
    Ok(leaves_to_layout(rico_leaves(doc, screen_px, map)?).0)
}

fn rico_leaves(doc: &Value, screen_px: (f64, f64), map: &LabelMap) -> Result<Vec<Leaf>> {
    let (sw, sh) = screen_px;
    if !(sw > 0.0 && sh > 0.0 && sw.is_finite() && sh.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "screen size {sw}x{sh} must be positive"
        )));
    }
    let root = doc.get("activity").and_then(|a| a.get("root")).unwrap_or(doc);
    if !root.is_object() {
        return Err(Error::Parse {
            path: String::new(),
            message: "root node must be an object".into(),
        });
    }
    if bounds(root).is_none() {
        return Err(Error::Parse {
            path: "bounds".into(),
            message: "root node needs four numeric bounds".into(),
        });
    }
    let mut leaves = Vec::new();
    collect_leaves(root, "root", screen_px, map, &mut leaves);
    Ok(leaves)
}

fn leaves_to_layout(mut leaves: Vec<Leaf>) -> (Layout, Vec<String>) {
    if leaves.len() > N_MAX {
        let mut by_area: Vec<usize> = (0..leaves.len()).collect();
        by_area.sort_by(|&a, &b| {
            leaves[b]
                .component
                .area()
                .total_cmp(&leaves[a].component.area())
        });
        let mut keep = vec![false; leaves.len()];
        for &i in &by_area[..N_MAX] {
            keep[i] = true;
        }
        let mut k = keep.into_iter();
        leaves.retain(|_| k.next().unwrap_or(false));
    }
    let labels = leaves.iter().map(|l| l.label.clone()).collect();
    let layout = Layout::new(leaves.into_iter().map(|l| l.component).collect());
    (layout, labels)
}

pub fn parse_rico(json: &str, screen_px: (f64, f64), map: &LabelMap) -> Result<Layout> {
    let doc: Value = serde_json::from_str(json).map_err(|e| Error::Parse {
        path: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    parse_rico_value(&doc, screen_px, map)
}

fn keywords_for(layout: &Layout, labels: &[String]) -> Condition {
    let mut words: Vec<String> = layout
        .components
        .iter()
        .map(|c| match c.ctype {
            ComponentType::ListItem => "list".to_string(),
            other => other.name().to_string(),
        })
        .collect();
    for label in labels {
        words.extend(
            label
                .split(|c: char| !c.is_alphanumeric())
                .map(str::to_lowercase),
        );
    }
    Condition::from_words(words.iter().map(String::as_str).filter(|w| vocab_index(w).is_some()))
        .with_sketch_of(layout)
}

/// Parses every `*.json` file of `dir` in path order. Files that fail to parse are
/// skipped with a warning; empty layouts are dropped.
pub fn ingest_dir(dir: impl AsRef<Path>, screen_px: (f64, f64), map: &LabelMap) -> Result<Corpus> {
    let dir = dir.as_ref();
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    let mut items = Vec::new();
    for path in paths {
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let parsed = serde_json::from_str::<Value>(&text)
            .map_err(|e| Error::Parse {
                path: format!("line {} column {}", e.line(), e.column()),
                message: e.to_string(),
            })
            .and_then(|doc| rico_leaves(&doc, screen_px, map));
        let leaves = match parsed {
            Ok(l) => l,
            Err(e) => {
                warn!("{}: {e}; skipped", path.display());
                continue;
            }
        };
        let (layout, labels) = leaves_to_layout(leaves);
        if layout.is_empty() {
            continue;
        }
        let condition = keywords_for(&layout, &labels);
        items.push(CorpusItem {
            layout,
            condition,
            tag: path.file_name().map(|n| n.to_string_lossy().into_owned()),
        });
    }
    if items.is_empty() {
        return Err(Error::Data(format!(
            "no usable layouts found in {}",
            dir.display()
        )));
    }
    Ok(Corpus::new(
        items,
        Provenance {
            source: format!("rico:{}", dir.display()),
            seed: None,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    const SCREEN: (f64, f64) = (1440.0, 2560.0);

    fn parse(v: Value) -> Result<Layout> {
        parse_rico_value(&v, SCREEN, &LabelMap::builtin())
    }

    #[test]
    fn two_leaf_children() {
        let doc = json!({
            "bounds": [0, 0, 1440, 2560],
            "class": "android.widget.FrameLayout",
            "children": [
                {"bounds": [0, 0, 1440, 256], "componentLabel": "Toolbar"},
                {"bounds": [144, 512, 1296, 768], "componentLabel": "Text Button"}
            ]
        });
        let l = parse(doc).unwrap();
        assert_eq!(l.len(), 2);
        assert_eq!(l.components[0].ctype, ComponentType::Other);
        assert_eq!(l.components[1].ctype, ComponentType::Button);
        let b = &l.components[1];
        assert!((b.left() - 0.1).abs() < 1e-12 && (b.right() - 0.9).abs() < 1e-12);
        assert!((b.top() - 0.2).abs() < 1e-12 && (b.bottom() - 0.3).abs() < 1e-12);
        assert_eq!(b.color, default_color(ComponentType::Button));
    }

    #[test]
    fn childless_root_is_its_own_leaf() {
        let l = parse(json!({"bounds": [0, 0, 1440, 2560], "class": "Zxq"})).unwrap();
        assert_eq!(l.len(), 1);
        assert_eq!(l.components[0].ctype, ComponentType::Other);
    }

    #[test]
    fn zero_area_root_is_empty() {
        assert!(parse(json!({"bounds": [5, 5, 5, 900]})).unwrap().is_empty());
    }

    #[test]
    fn label_table() {
        let map = LabelMap::builtin();
        assert_eq!(map.lookup("TextButton"), ComponentType::Button);
        assert_eq!(map.lookup("Zxq"), ComponentType::Other);
        assert_eq!(map.lookup("android.widget.EditText"), ComponentType::Input);
    }

    #[test]
    fn sanitizes_nodes() {
        let doc = json!({
            "bounds": [0, 0, 1440, 2560],
            "children": [
                {"bounds": [1296, 768, 144, 512], "class": "Button", "color": "#ff8000"},
                {"bounds": [0, 0, 10], "class": "Button"},
                "junk",
                {"bounds": [0, 2000, 2000, 3000], "class": "Image", "color": [0, 128, 255]},
                {"bounds": [0, 0, 100, 100], "class": "Icon", "visible-to-user": false}
            ]
        });
        let l = parse(doc).unwrap();
        assert_eq!(l.len(), 2);
        let b = &l.components[0];
        assert!((b.left() - 0.1).abs() < 1e-12 && (b.bottom() - 0.3).abs() < 1e-12);
        assert_eq!(b.color, [1.0, 128.0 / 255.0, 0.0]);
        let img = &l.components[1];
        assert!((img.right() - 1.0).abs() < 1e-12 && (img.bottom() - 1.0).abs() < 1e-12);
        assert_eq!(img.color, [0.0, 128.0 / 255.0, 1.0]);
        assert!(l.validate().is_ok());
    }

    #[test]
    fn truncates_to_largest_leaves_in_order() {
        let kids: Vec<Value> = (0..20)
            .map(|i| {
                let w = 10 + 10 * ((i * 7) % 20);
                json!({"bounds": [0, i * 120, w, i * 120 + 100], "class": "Text"})
            })
            .collect();
        let l = parse(json!({"bounds": [0, 0, 1440, 2560], "children": kids})).unwrap();
        assert_eq!(l.len(), N_MAX);
        let min_kept = l.components.iter().map(Component::area).fold(f64::MAX, f64::min);
        assert!(min_kept > 40.0 / 1440.0 * (100.0 / 2560.0));
        assert!(l.components.windows(2).all(|w| w[0].cy < w[1].cy));
    }

    #[test]
    fn malformed_documents_report_paths() {
        let map = LabelMap::builtin();
        match parse_rico("{\"bounds\": [0, 0, 1", SCREEN, &map) {
            Err(Error::Parse { path, .. }) => assert!(path.starts_with("line 1")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse(json!([1, 2])), Err(Error::Parse { .. })));
        assert!(matches!(
            parse(json!({"bounds": "x"})),
            Err(Error::Parse { path, .. }) if path == "bounds"
        ));
    }

    #[test]
    fn ingest_directory_in_path_order() {
        let dir = tempfile::tempdir().unwrap();
        let doc = |y: i64| {
            json!({"bounds": [0, 0, 1440, 2560], "children": [
                {"bounds": [100, y, 1300, y + 200], "componentLabel": "Text Button"}
            ]})
            .to_string()
        };
        fs::write(dir.path().join("b.json"), doc(800)).unwrap();
        fs::write(dir.path().join("a.json"), doc(100)).unwrap();
        fs::write(dir.path().join("c.json"), "{oops").unwrap();
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let corpus = ingest_dir(dir.path(), SCREEN, &map()).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus.items[0].tag.as_deref(), Some("a.json"));
        assert!(corpus.items[0].condition.words().contains(&"button"));
    }

    fn map() -> LabelMap {
        LabelMap::builtin()
    }
}
