//! Convert RICO-style view hierarchies into a training corpus.
//!
//! cargo run --release --example ingest_rico -- [dir-of-json]
//!
//! Without a directory, two hierarchies are written to a temporary one first.

use std::fs;
use std::path::PathBuf;

use layoutforge::dataio::{ingest_dir, LabelMap};

const LOGIN: &str = r#"{"bounds": [0, 0, 1440, 2560], "class": "android.widget.FrameLayout", "children": [
  {"bounds": [0, 0, 1440, 220], "componentLabel": "Toolbar"},
  {"bounds": [160, 700, 1280, 860], "componentLabel": "Input"},
  {"bounds": [160, 920, 1280, 1080], "componentLabel": "Input"},
  {"bounds": [400, 1200, 1040, 1360], "componentLabel": "Text Button"}]}"#;

const FEED: &str = r#"{"bounds": [0, 0, 1440, 2560], "children": [
  {"bounds": [0, 0, 1440, 220], "componentLabel": "Toolbar"},
  {"bounds": [0, 240, 1440, 1100], "componentLabel": "Image"},
  {"bounds": [80, 1140, 1360, 1300], "componentLabel": "Text"},
  {"bounds": [0, 2340, 1440, 2560], "componentLabel": "Bottom Navigation"}]}"#;

fn main() -> layoutforge::Result<()> {
    let dir = match std::env::args().nth(1) {
        Some(d) => PathBuf::from(d),
        None => {
            let d = std::env::temp_dir().join("layoutforge-rico-demo");
            fs::create_dir_all(&d).expect("temp dir");
            fs::write(d.join("login.json"), LOGIN).expect("write");
            fs::write(d.join("feed.json"), FEED).expect("write");
            d
        }
    };
    let map = LabelMap::builtin();
    let corpus = ingest_dir(&dir, (1440.0, 2560.0), &map)?;
    for item in &corpus.items {
        println!("{} keywords {:?}", item.tag.as_deref().unwrap_or("?"), item.condition.words());
        for c in item.layout.visible() {
            println!("    {:<10} cx {:.3} cy {:.3} w {:.3} h {:.3}", c.ctype.name(), c.cx, c.cy, c.w, c.h);
        }
    }
    let out = std::env::temp_dir().join("layoutforge-rico.jsonl");
    corpus.save(&out)?;
    println!("{} layouts written to {}", corpus.len(), out.display());
    Ok(())
}
