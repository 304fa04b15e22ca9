use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::Deserialize;

use crate::{ClassId, Error, Result, IGNORE};

/// Raw class id to evaluation class id (`0..num_classes` or [`IGNORE`]).
///
/// Loaded from TOML:
///
/// ```toml
/// num_classes = 2
/// class_names = ["car", "road"]
/// ignore = [0, 1]
///
/// [map]
/// 10 = 0
/// 40 = 1
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct LabelRemap {
    table: HashMap<u16, ClassId>,
    num_classes: usize,
    class_names: Vec<String>,
}

#[derive(Deserialize)]
struct RemapFile {
    num_classes: usize,
    #[serde(default)]
    class_names: Vec<String>,
    #[serde(default)]
    ignore: Vec<u16>,
    map: BTreeMap<String, u16>,
}

impl LabelRemap {
    pub fn new(
        pairs: impl IntoIterator<Item = (u16, ClassId)>,
        ignore: impl IntoIterator<Item = u16>,
        num_classes: usize,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if num_classes == 0 || num_classes >= IGNORE as usize {
            return Err(Error::Config(format!("bad class count {num_classes}")));
        }
        if !class_names.is_empty() && class_names.len() != num_classes {
            return Err(Error::Config(format!(
                "{} class names for {num_classes} classes",
                class_names.len()
            )));
        }
        let mut table = HashMap::new();
        let mut covered = vec![false; num_classes];
        for (raw, eval) in pairs {
            if eval as usize >= num_classes {
                return Err(Error::Config(format!(
                    "raw id {raw} maps to {eval}, outside 0..{num_classes}"
                )));
            }
            covered[eval as usize] = true;
            if table.insert(raw, eval).is_some() {
                return Err(Error::Config(format!("raw id {raw} mapped twice")));
            }
        }
        for raw in ignore {
            if table.insert(raw, IGNORE).is_some() {
                return Err(Error::Config(format!("raw id {raw} is both mapped and ignored")));
            }
        }
        if let Some(missing) = covered.iter().position(|c| !c) {
            return Err(Error::Config(format!(
                "evaluation class {missing} has no raw id; ids must be contiguous"
            )));
        }
        Ok(Self {
            table,
            num_classes,
            class_names,
        })
    }

    pub fn identity(num_classes: usize) -> Result<Self> {
        Self::new((0..num_classes as u16).map(|c| (c, c)), [], num_classes, Vec::new())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: RemapFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut pairs = Vec::with_capacity(file.map.len());
        for (raw, eval) in file.map {
            let raw: u16 = raw
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("raw id {raw:?} is not an integer")))?;
            pairs.push((raw, eval));
        }
        Self::new(pairs, file.ignore, file.num_classes, file.class_names)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn get(&self, raw: u16) -> Option<ClassId> {
        self.table.get(&raw).copied()
    }

    pub fn remap(&self, labels: &[u16]) -> Result<Vec<ClassId>> {
        labels
            .iter()
            .map(|&raw| self.get(raw).ok_or(Error::UnknownClass(raw as u32)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let id = LabelRemap::identity(3).unwrap();
        assert_eq!(id.remap(&[]).unwrap(), Vec::<ClassId>::new());
        assert_eq!(id.remap(&[0, 1, 2]).unwrap(), vec![0, 1, 2]);

        let t = LabelRemap::new([(10, 0), (40, 1)], [], 2, vec![]).unwrap();
        assert_eq!(t.remap(&[40, 10, 40]).unwrap(), vec![1, 0, 1]);
        assert!(matches!(t.remap(&[10, 11]), Err(Error::UnknownClass(11))));
    }

    #[test]
    fn idempotent_on_evaluation_ids() {
        let t = LabelRemap::new([(0, 0), (1, 1), (2, 2), (7, 1)], [9], 3, vec![]).unwrap();
        let once = t.remap(&[7, 2, 0, 1]).unwrap();
        assert_eq!(t.remap(&once).unwrap(), once);
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(LabelRemap::new([(1, 3)], [], 2, vec![]).is_err());
        assert!(LabelRemap::new([(1, 0)], [], 2, vec![]).is_err());
        assert!(LabelRemap::new([(1, 0)], [1], 1, vec![]).is_err());
    }

    #[test]
    fn parses_toml_and_ignore() {
        let t = LabelRemap::from_toml_str(
            "num_classes = 2\nclass_names = [\"car\", \"road\"]\nignore = [0]\n[map]\n10 = 0\n40 = 1\n",
        )
        .unwrap();
        assert_eq!(t.remap(&[0, 40]).unwrap(), vec![IGNORE, 1]);
        assert_eq!(t.class_names(), ["car", "road"]);
    }

    #[test]
    fn shipped_semantic_kitti_table() {
        let text = include_str!("../../configs/semantic-kitti-remap.toml");
        let t = LabelRemap::from_toml_str(text).unwrap();
        assert_eq!(t.num_classes(), 19);
        assert_eq!(t.get(10), Some(0));
        assert_eq!(t.get(252), Some(0));
        assert_eq!(t.get(81), Some(18));
        assert_eq!(t.get(0), Some(IGNORE));
    }
}
