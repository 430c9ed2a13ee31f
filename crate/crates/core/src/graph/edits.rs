use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditAction {
    Add,
    Remove,
}

impl fmt::Display for EditAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EditAction::Add => "add",
            EditAction::Remove => "remove",
        })
    }
}

impl FromStr for EditAction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "add" => Ok(EditAction::Add),
            "remove" => Ok(EditAction::Remove),
            other => Err(Error::InvalidEdit(format!("unknown action {other:?}"))),
        }
    }
}

/// One edge flip. `i < j` for edits built through [`Edit::new`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edit {
    pub i: usize,
    pub j: usize,
    pub action: EditAction,
    /// Absolute gradient value that selected this pair; 0 for heuristic
    /// baselines.
    pub magnitude: f64,
}

impl Edit {
    pub fn new(a: usize, b: usize, action: EditAction, magnitude: f64) -> Self {
        let (i, j) = if a <= b { (a, b) } else { (b, a) };
        Self {
            i,
            j,
            action,
            magnitude,
        }
    }

    pub fn pair(&self) -> (usize, usize) {
        (self.i, self.j)
    }
}

/// Ordered edge flips plus the budget that was asked for.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EditList {
    edits: Vec<Edit>,
    requested: usize,
}

impl EditList {
    pub fn from_edits(edits: Vec<Edit>, requested: usize) -> Self {
        Self { edits, requested }
    }

    pub fn len(&self) -> usize {
        self.edits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edits.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Edit> {
        self.edits.iter()
    }

    pub fn as_slice(&self) -> &[Edit] {
        &self.edits
    }

    pub fn requested(&self) -> usize {
        self.requested
    }

    /// Budget left unspent because candidates ran out.
    pub fn shortfall(&self) -> usize {
        self.requested.saturating_sub(self.edits.len())
    }

    pub fn count(&self, action: EditAction) -> usize {
        self.edits.iter().filter(|e| e.action == action).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,action,magnitude\n");
        for e in &self.edits {
            out.push_str(&format!("{},{},{},{:e}\n", e.i, e.j, e.action, e.magnitude));
        }
        out
    }

    pub fn parse_csv(text: &str, origin: &str) -> Result<Self> {
        let mut edits = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with("i,")) {
                continue;
            }
            let parse_err = |msg: String| Error::Parse {
                path: origin.to_string(),
                line: lineno + 1,
                msg,
            };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let [i, j, action, magnitude] = fields[..] else {
                return Err(parse_err(format!("expected 4 fields, got {}", fields.len())));
            };
            let i = i.parse().map_err(|e| parse_err(format!("bad node id {i:?}: {e}")))?;
            let j = j.parse().map_err(|e| parse_err(format!("bad node id {j:?}: {e}")))?;
            let action = action.parse().map_err(|e: Error| parse_err(e.to_string()))?;
            let magnitude = magnitude
                .parse()
                .map_err(|e| parse_err(format!("bad magnitude {magnitude:?}: {e}")))?;
            edits.push(Edit::new(i, j, action, magnitude));
        }
        let requested = edits.len();
        Ok(Self { edits, requested })
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, &path.display().to_string())
    }
}

impl<'a> IntoIterator for &'a EditList {
    type Item = &'a Edit;
    type IntoIter = std::slice::Iter<'a, Edit>;

    fn into_iter(self) -> Self::IntoIter {
        self.edits.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let list = EditList::from_edits(
            vec![
                Edit::new(3, 1, EditAction::Add, 2.5),
                Edit::new(0, 2, EditAction::Remove, 0.125),
            ],
            2,
        );
        let back = EditList::parse_csv(&list.to_csv(), "mem").unwrap();
        assert_eq!(back, list);
        assert_eq!(back.as_slice()[0].pair(), (1, 3));
    }

    #[test]
    fn csv_rejects_bad_action() {
        let err = EditList::parse_csv("i,j,action,magnitude\n0,1,toggle,1\n", "mem").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }
}
