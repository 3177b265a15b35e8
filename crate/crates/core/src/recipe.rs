//! The recipe table format.
//!
//! Each line is `[cycles] action component setting wait`, separated by tabs
//! or runs of spaces. A line that carries a cycle count opens a new block;
//! lines without one continue the current block. Anything after `#` is a
//! comment.
//!
//! ```text
//! 1   M   1   50  0     # MFC 1 at 50 sccm
//!     V   2   0   10
//! 5   V   2   1   1     # open valve 2, wait 1 s
//!     V   2   0   10
//! ```

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::RecipeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    #[serde(rename = "M")]
    Mfc,
    #[serde(rename = "V")]
    Valve,
    #[serde(rename = "T")]
    Temperature,
}

impl Action {
    pub fn letter(self) -> char {
        match self {
            Action::Mfc => 'M',
            Action::Valve => 'V',
            Action::Temperature => 'T',
        }
    }

    fn from_token(tok: &str) -> Option<Action> {
        match tok {
            "M" | "m" => Some(Action::Mfc),
            "V" | "v" => Some(Action::Valve),
            "T" | "t" => Some(Action::Temperature),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecipeLine {
    pub action: Action,
    /// MFC id, valve id, or temperature controller (0 = reactor, k = bubbler k).
    pub component: u32,
    pub setting: f64,
    /// Seconds to wait after applying the action.
    pub wait: f64,
    /// 1-based line number in the source text, 0 when built programmatically.
    #[serde(default)]
    pub source_line: usize,
}

impl RecipeLine {
    pub fn new(action: Action, component: u32, setting: f64, wait: f64) -> Self {
        RecipeLine {
            action,
            component,
            setting,
            wait,
            source_line: 0,
        }
    }

    /// Human-readable description of the control action.
    pub fn describe(&self) -> String {
        match self.action {
            Action::Mfc => format!("set MFC {} to {} sccm", self.component, self.setting),
            Action::Valve if self.setting >= 0.5 => format!("open valve {}", self.component),
            Action::Valve => format!("close valve {}", self.component),
            Action::Temperature if self.component == 0 => {
                format!("set reactor temperature to {} K", self.setting)
            }
            Action::Temperature => format!(
                "set bubbler {} temperature to {} K",
                self.component, self.setting
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub cycles: u32,
    pub lines: Vec<RecipeLine>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub blocks: Vec<Block>,
}

/// Controls in force: valve positions, carrier flow and temperatures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlState {
    pub valves: BTreeMap<u32, bool>,
    /// sccm
    pub mfc_flow: f64,
    /// K
    pub reactor_temperature: f64,
    /// K, keyed by bubbler/valve id.
    pub bubbler_temperatures: BTreeMap<u32, f64>,
}

impl ControlState {
    pub fn apply(&mut self, line: &RecipeLine) {
        match line.action {
            Action::Mfc => self.mfc_flow = line.setting,
            Action::Valve => {
                self.valves.insert(line.component, line.setting >= 0.5);
            }
            Action::Temperature if line.component == 0 => self.reactor_temperature = line.setting,
            Action::Temperature => {
                self.bubbler_temperatures.insert(line.component, line.setting);
            }
        }
    }

    pub fn open_valves(&self) -> Vec<u32> {
        self.valves
            .iter()
            .filter(|(_, open)| **open)
            .map(|(id, _)| *id)
            .collect()
    }

    pub fn is_open(&self, valve: u32) -> bool {
        self.valves.get(&valve).copied().unwrap_or(false)
    }
}

/// One executed recipe line: the action, how long to hold it, and the
/// controls in force afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    /// 0-based position in the expanded schedule.
    pub index: usize,
    pub block: usize,
    pub cycle: u32,
    pub line: RecipeLine,
    pub duration: f64,
    pub controls: ControlState,
}

/// Parse recipe text.
pub fn parse_recipe(text: &str) -> Result<Recipe, RecipeError> {
    let mut recipe = Recipe::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        // Quotes sometimes wrap a pasted recipe string.
        let content = content.trim().trim_matches('"').trim();
        if content.is_empty() {
            continue;
        }
        let tokens = tokenize(raw, content);
        let (cycles, fields) = match tokens.len() {
            5 => {
                let (col, tok) = tokens[0];
                let cycles = parse_cycles(tok, line_no, col)?;
                (Some(cycles), &tokens[1..])
            }
            // "1 V 2 1" reads as a block line with a field missing
            4 if Action::from_token(tokens[0].1).is_none() && Action::from_token(tokens[1].1).is_some() => {
                return Err(RecipeError::Arity {
                    line: line_no,
                    column: tokens[0].0,
                    found: 4,
                })
            }
            4 => (None, &tokens[..]),
            n => {
                return Err(RecipeError::Arity {
                    line: line_no,
                    column: tokens.get(0).map(|t| t.0).unwrap_or(1),
                    found: n,
                })
            }
        };
        let (acol, atok) = fields[0];
        let action = Action::from_token(atok).ok_or_else(|| {
                RecipeError::UnknownAction {
                line: line_no,
                column: acol,
                found: atok.to_string(),
            }
        })?;
        let (ccol, ctok) = fields[1];
        let component: u32 = ctok.parse().map_err(|_| RecipeError::NotNumeric {
            line: line_no,
            column: ccol,
            found: ctok.to_string(),
            expected: "component id",
        })?;
        let setting = parse_number(fields[2], line_no, "setting")?;
        let wait = parse_number(fields[3], line_no, "wait time")?;
        if wait < 0.0 {
            return Err(RecipeError::InvalidValue {
                line: line_no,
                column: fields[3].0,
                message: format!("wait time must be >= 0, got {wait}"),
            });
        }
        if action == Action::Valve && setting != 0.0 && setting != 1.0 {
            return Err(RecipeError::InvalidValue {
                line: line_no,
                column: fields[2].0,
                message: format!("valve setting must be 0 or 1, got {setting}"),
            });
        }
        let line = RecipeLine {
            action,
            component,
            setting,
            wait,
            source_line: line_no,
        };
        match cycles {
            Some(cycles) => recipe.blocks.push(Block {
                cycles,
                lines: vec![line],
            }),
            None => match recipe.blocks.last_mut() {
                Some(block) => block.lines.push(line),
                None => return Err(RecipeError::MissingFirstCycles { line: line_no }),
            },
        }
    }
    Ok(recipe)
}

/// Split into (1-based column, token) pairs; columns refer to `raw`.
fn tokenize<'a>(raw: &'a str, content: &'a str) -> Vec<(usize, &'a str)> {
    let base = content.as_ptr() as usize - raw.as_ptr() as usize;
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in content.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((base + s + 1, &content[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((base + s + 1, &content[s..]));
    }
    out
}

fn parse_cycles(tok: &str, line: usize, column: usize) -> Result<u32, RecipeError> {
    let value: i64 = tok.parse().map_err(|_| {
        if Action::from_token(tok).is_some() || tok.parse::<f64>().is_err() {
            RecipeError::NotNumeric {
                line,
                column,
                found: tok.to_string(),
                expected: "cycle count",
            }
        } else {
            RecipeError::NotNumeric {
                line,
                column,
                found: tok.to_string(),
                expected: "integer cycle count",
            }
        }
    })?;
    if value <= 0 {
        return Err(RecipeError::NonPositiveCycles {
            line,
            column,
            found: tok.to_string(),
        });
    }
    u32::try_from(value).map_err(|_| RecipeError::InvalidValue {
        line,
        column,
        message: format!("cycle count {value} too large"),
    })
}

fn parse_number(
    (column, tok): (usize, &str),
    line: usize,
    expected: &'static str,
) -> Result<f64, RecipeError> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(RecipeError::NotNumeric {
            line,
            column,
            found: tok.to_string(),
            expected,
        }),
    }
}

impl Recipe {
    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Number of segments after unrolling cycles.
    pub fn segment_count(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| b.cycles as usize * b.lines.len())
            .sum()
    }

    /// Canonical tab-separated rendering.
    pub fn format(&self) -> String {
        self.to_string()
    }

    /// Unrolled lines in execution order, with block and cycle indices.
    pub fn unrolled(&self) -> impl Iterator<Item = (usize, u32, &RecipeLine)> + '_ {
        self.blocks.iter().enumerate().flat_map(|(bi, block)| {
            (0..block.cycles).flat_map(move |cy| block.lines.iter().map(move |l| (bi, cy, l)))
        })
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for block in &self.blocks {
            for (i, line) in block.lines.iter().enumerate() {
                if i == 0 {
                    write!(f, "{}", block.cycles)?;
                }
                writeln!(
                    f,
                    "\t{}\t{}\t{}\t{}",
                    line.action.letter(),
                    line.component,
                    line.setting,
                    line.wait
                )?;
            }
        }
        Ok(())
    }
}

/// Unroll a recipe, threading the control state from `start`.
pub fn expand(recipe: &Recipe, start: &ControlState) -> Vec<SegmentSpec> {
    let mut controls = start.clone();
    recipe
        .unrolled()
        .enumerate()
        .map(|(index, (block, cycle, line))| {
            controls.apply(line);
            SegmentSpec {
                index,
                block,
                cycle,
                line: line.clone(),
                duration: line.wait,
                controls: controls.clone(),
            }
        })
        .collect()
}

/// Sum of waits over the unrolled recipe (s).
pub fn total_duration(recipe: &Recipe) -> f64 {
    // Summed in execution order so it matches the integrator clock exactly.
    recipe.unrolled().map(|(_, _, l)| l.wait).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) const REFERENCE_RECIPE: &str = "1\tM\t1\t50\t0\t# MFC 1 @50 SCCM
\tV\t2\t0\t0\t# close valve 2
\tV\t3\t0\t10\t# close valve 3
5\tV\t2\t1\t1\t# open valve 2, wait 1s
\tV\t2\t0\t10\t# close valve 2, wait 10s
\tV\t3\t1\t1\t# open valve 3, wait 1s
\tV\t3\t0\t10\t#close valve 3, wait 10s
";

    /// The longer worked example, as pasted (quoted, space-aligned).
    const WORKED: &str = "\"
1   M   1   50  0.      # Set purge gas to 50 sccm, wait 0s.
    T   0   500 0.      # set reactor temperature (number 0) to 500K
    T   1   350 0.      # set temperature of bubbler 1 (containing chemical A) to 350 K
    V   1   0   0.      # make sure valve 1 (opening access to bubbler 1) is closed before you start the process, wait 0s.
    V   2   0   0.      # make sure valve 2 is closed before you start the process, wait 0s.
    V   3   0   0.      # make sure valve 3 is closed before you start the process, wait 0s.
    V   4   0   10.     # make sure valve 4 is closed before you start the process, wait 10s.
5   V   1   1   1.      # open valve 1, wait 1s
    V   1   0   10.     # close valve 1, wait 10s
3   V   2   1   2.      # open valve 2, wait 1s
    V   2   0   10.     # close valve 2, wait 10s
\"";

    #[test]
    fn worked_example_golden() {
        let r = parse_recipe(WORKED).unwrap();
        assert_eq!(r.blocks.len(), 3);
        assert_eq!(expand(&r, &closed()).len(), 23);
        assert_eq!(total_duration(&r), 101.0);
    }

    #[test]
    fn comment_wrapped_onto_its_own_line_is_rejected() {
        let wrapped = WORKED.replacen(
            "is closed before you start the process, wait 0s.",
            "is closed\n                            before you start the process, wait 0s.",
            1,
        );
        let err = parse_recipe(&wrapped).unwrap_err();
        assert!(matches!(err, RecipeError::UnknownAction { line: 6, .. } | RecipeError::Arity { line: 6, .. }), "{err:?}");
    }

    fn closed() -> ControlState {
        ControlState {
            valves: BTreeMap::new(),
            mfc_flow: 0.0,
            reactor_temperature: 500.0,
            bubbler_temperatures: BTreeMap::new(),
        }
    }

    #[test]
    fn reference_recipe_structure() {
        let r = parse_recipe(REFERENCE_RECIPE).unwrap();
        assert_eq!(r.blocks.len(), 2);
        assert_eq!((r.blocks[0].cycles, r.blocks[0].lines.len()), (1, 3));
        assert_eq!((r.blocks[1].cycles, r.blocks[1].lines.len()), (5, 4));
        assert_eq!(expand(&r, &closed()).len(), 23);
        assert_eq!(total_duration(&r), 120.0);
    }

    #[test]
    fn unknown_action() {
        let err = parse_recipe("1\tX\t1\t50\t0").unwrap_err();
        assert!(matches!(err, RecipeError::UnknownAction { line: 1, column: 3, .. }), "{err:?}");
    }

    #[test]
    fn error_positions() {
        let err = parse_recipe("1 V 2 1 1\n  V two 1 1").unwrap_err();
        assert!(matches!(err, RecipeError::NotNumeric { line: 2, column: 5, .. }), "{err:?}");
        let err = parse_recipe("0 V 2 1 1").unwrap_err();
        assert!(matches!(err, RecipeError::NonPositiveCycles { line: 1, column: 1, .. }));
        let err = parse_recipe("-2 V 2 1 1").unwrap_err();
        assert!(matches!(err, RecipeError::NonPositiveCycles { .. }));
        let err = parse_recipe("1 V 2 1").unwrap_err();
        assert!(matches!(err, RecipeError::Arity { line: 1, found: 4, .. }));
        let err = parse_recipe("1 V 2 1 1 1").unwrap_err();
        assert!(matches!(err, RecipeError::Arity { found: 6, .. }));
        let err = parse_recipe("  V 2 1 1").unwrap_err();
        assert!(matches!(err, RecipeError::MissingFirstCycles { line: 1 }));
        let err = parse_recipe("1 V 2 0.5 1").unwrap_err();
        assert!(matches!(err, RecipeError::InvalidValue { .. }));
        let err = parse_recipe("1 V 2 1 -1").unwrap_err();
        assert!(matches!(err, RecipeError::InvalidValue { .. }));
    }

    #[test]
    fn comments_and_blank_lines() {
        let r = parse_recipe("# header\n\n2  V 1 1 1   # pulse\n   V 1 0 2.\n").unwrap();
        assert_eq!(r.segment_count(), 4);
        assert_eq!(total_duration(&r), 6.0);
    }

    #[test]
    fn empty_recipe() {
        let r = parse_recipe("").unwrap();
        assert!(r.is_empty());
        assert_eq!(total_duration(&r), 0.0);
        assert!(expand(&r, &closed()).is_empty());
    }

    #[test]
    fn single_cycle_block_appears_once() {
        let r = parse_recipe("1 V 1 1 1\n V 1 0 1").unwrap();
        let segs = expand(&r, &closed());
        assert_eq!(segs.len(), 2);
        assert!(segs[0].controls.is_open(1));
        assert!(!segs[1].controls.is_open(1));
    }

    #[test]
    fn controls_thread_through() {
        let r = parse_recipe(REFERENCE_RECIPE).unwrap();
        let segs = expand(&r, &closed());
        assert_eq!(segs[0].controls.mfc_flow, 50.0);
        assert!(segs[3].controls.is_open(2));
        assert!(!segs[4].controls.is_open(2));
        assert!(segs[22].controls.valves.values().all(|open| !open));
        assert_eq!(segs[22].cycle, 4);
    }

    fn arb_line() -> impl Strategy<Value = RecipeLine> {
        prop_oneof![
            (1u32..3, 0.0f64..1000.0, 0u32..200).prop_map(|(c, s, w)| RecipeLine::new(
                Action::Mfc,
                c,
                (s * 10.0).round() / 10.0,
                w as f64 / 10.0
            )),
            (1u32..5, any::<bool>(), 0u32..200).prop_map(|(c, o, w)| RecipeLine::new(
                Action::Valve,
                c,
                if o { 1.0 } else { 0.0 },
                w as f64 / 4.0
            )),
            (0u32..5, 250.0f64..800.0, 0u32..50).prop_map(|(c, s, w)| RecipeLine::new(
                Action::Temperature,
                c,
                s,
                w as f64
            )),
        ]
    }

    fn arb_recipe() -> impl Strategy<Value = Recipe> {
        prop::collection::vec(
            (1u32..6, prop::collection::vec(arb_line(), 1..5))
                .prop_map(|(cycles, lines)| Block { cycles, lines }),
            0..4,
        )
        .prop_map(|blocks| Recipe { blocks })
    }

    fn strip_lines(mut r: Recipe) -> Recipe {
        for b in &mut r.blocks {
            for l in &mut b.lines {
                l.source_line = 0;
            }
        }
        r
    }

    proptest! {
        #[test]
        fn format_parse_fixed_point(r in arb_recipe()) {
            let text = r.format();
            let parsed = strip_lines(parse_recipe(&text).unwrap());
            prop_assert_eq!(&parsed, &r);
            prop_assert_eq!(parsed.format(), text);
        }

        #[test]
        fn expanded_duration_matches(r in arb_recipe()) {
            let segs = expand(&r, &closed());
            prop_assert_eq!(segs.len(), r.segment_count());
            let summed: f64 = segs.iter().map(|s| s.duration).sum();
            prop_assert_eq!(summed, total_duration(&r));
        }
    }
}
