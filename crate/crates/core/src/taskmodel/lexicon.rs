//! Verbal instruction → task type, tolerant of small wording differences.

use std::cmp::Reverse;

use serde::{Deserialize, Serialize};

use crate::contact::TaskType;
use crate::error::{Error, Result};

/// Placeholder capturing the object name.
pub const OBJECT: &str = "<object>";
/// Placeholder absorbing words that are not captured.
pub const WILDCARD: &str = "<*>";

const PRONOUNS: [&str; 4] = ["it", "this", "that", "them"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub patterns: Vec<String>,
    pub task: TaskType,
    /// Largest token-level edit distance accepted for a fuzzy match.
    pub max_edit_distance: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Item {
    Word(String),
    Object,
    Wildcard,
}

fn tokenize(s: &str) -> Vec<String> {
    s.split(|c: char| !(c.is_alphanumeric() || c == '<' || c == '>' || c == '*'))
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

fn compile(pattern: &str) -> Vec<Item> {
    tokenize(pattern)
        .into_iter()
        .map(|t| match t.as_str() {
            OBJECT => Item::Object,
            WILDCARD => Item::Wildcard,
            _ => Item::Word(t),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
    compiled: Vec<Vec<(Vec<Item>, usize)>>,
}

impl Lexicon {
    /// Rejects empty pattern lists and exact patterns shared by two tasks.
    pub fn new(entries: Vec<LexiconEntry>) -> Result<Self> {
        let mut seen: Vec<(Vec<Item>, TaskType)> = Vec::new();
        let mut compiled = Vec::with_capacity(entries.len());
        for e in &entries {
            if e.patterns.is_empty() {
                return Err(Error::invalid(format!("lexicon entry for {} has no patterns", e.task)));
            }
            let mut c = Vec::new();
            for p in &e.patterns {
                let items = compile(p);
                if items.is_empty() {
                    return Err(Error::invalid(format!("empty pattern for {}", e.task)));
                }
                if let Some((_, other)) = seen.iter().find(|(s, t)| *s == items && *t != e.task) {
                    return Err(Error::invalid(format!("pattern `{p}` is shared by {} and {other}", e.task)));
                }
                seen.push((items.clone(), e.task));
                let literals = items.iter().filter(|i| matches!(i, Item::Word(_))).count();
                c.push((items, literals));
            }
            compiled.push(c);
        }
        Ok(Lexicon { entries, compiled })
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let entries: Vec<LexiconEntry> = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::Schema { path: e.path().to_string(), message: e.into_inner().to_string() })?;
        Lexicon::new(entries)
    }
}

impl Default for Lexicon {
    fn default() -> Self {
        use TaskType::*;
        let entry = |task, patterns: &[&str]| LexiconEntry {
            patterns: patterns.iter().map(|s| s.to_string()).collect(),
            task,
            max_edit_distance: 1,
        };
        Lexicon::new(vec![
            entry(Grasp, &["grasp the <object>", "grab the <object>", "hold the <object>", "grasp it"]),
            entry(
                PTG11,
                &["pick up the <object>", "pick up the <object> from the <*>", "lift the <object>", "pick it up"],
            ),
            entry(
                PTG13,
                &[
                    "place the <object> on <*>",
                    "put the <object> on <*>",
                    "place the <object>",
                    "put it down",
                    "place it on <*>",
                ],
            ),
            entry(
                STG12,
                &["bring the <object> carefully", "bring it carefully", "carry the <object> carefully", "bring the <object>"],
            ),
            entry(Release, &["release the <object>", "release it", "let go of the <object>", "let go"]),
            entry(PTG31, &["open the drawer", "pull out the drawer", "open the <*> drawer"]),
            entry(PTG33, &["close the drawer", "push in the drawer", "close the <*> drawer"]),
            entry(
                PTG51,
                &["open the door", "open the fridge", "open the refrigerator", "open the <*> door"],
            ),
            entry(
                PTG53,
                &["close the door", "close the fridge", "close the refrigerator", "close the <*> door"],
            ),
        ])
        .expect("default lexicon is consistent")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum InstructionMatch {
    /// `object` is `None` when the phrase names no object or uses a pronoun;
    /// the caller resolves it from context.
    Recognized { task: TaskType, object: Option<String>, distance: usize },
    /// Several tasks fit equally well, in lexicon order.
    Ambiguous { candidates: Vec<(TaskType, Option<String>)>, distance: usize },
}

impl InstructionMatch {
    /// The first (or only) candidate.
    pub fn primary(&self) -> (TaskType, Option<String>) {
        match self {
            InstructionMatch::Recognized { task, object, .. } => (*task, object.clone()),
            InstructionMatch::Ambiguous { candidates, .. } => candidates[0].clone(),
        }
    }
}

fn object_name(tokens: &[String]) -> Option<String> {
    if tokens.len() == 1 && PRONOUNS.contains(&tokens[0].as_str()) {
        return None;
    }
    Some(tokens.join(" "))
}

/// Exact match with placeholders absorbing one or more tokens. The object
/// capture is kept as short as possible.
fn exact(items: &[Item], tokens: &[String]) -> Option<Option<Vec<String>>> {
    match items.split_first() {
        None => tokens.is_empty().then_some(None),
        Some((Item::Word(w), rest)) => {
            if tokens.first() == Some(w) { exact(rest, &tokens[1..]) } else { None }
        }
        Some((ph, rest)) => {
            for k in 1..=tokens.len() {
                if let Some(cap) = exact(rest, &tokens[k..]) {
                    return Some(if *ph == Item::Object { Some(tokens[..k].to_vec()) } else { cap });
                }
            }
            None
        }
    }
}

fn substitution_cost(a: &str, b: &str) -> usize {
    if a == b {
        return 0;
    }
    let limit = if a.chars().count().max(b.chars().count()) >= 6 { 2 } else { 1 };
    if strsim::levenshtein(a, b) <= limit { 1 } else { 2 }
}

#[derive(Clone, Copy)]
enum Step {
    Start,
    Match,
    SkipItem,
    SkipToken,
    Absorb(usize),
}

/// Token-level edit distance between a pattern and a phrase. Words that are
/// misspellings of each other cost 1 to substitute, unrelated words 2.
/// Placeholders absorb any non-empty run of tokens for free. Also returns how
/// many pattern words were aligned with phrase words, used to break ties in
/// favour of patterns that explain the phrase with words rather than
/// placeholders.
fn fuzzy(items: &[Item], tokens: &[String]) -> (usize, usize, Option<Vec<String>>) {
    let (m, n) = (items.len(), tokens.len());
    let mut d = vec![vec![usize::MAX; n + 1]; m + 1];
    let mut back = vec![vec![Step::Start; n + 1]; m + 1];
    d[0][0] = 0;
    for j in 1..=n {
        d[0][j] = j;
        back[0][j] = Step::SkipToken;
    }
    for i in 1..=m {
        d[i][0] = d[i - 1][0] + 1;
        back[i][0] = Step::SkipItem;
        for j in 1..=n {
            let mut best = (d[i - 1][j] + 1, Step::SkipItem);
            match &items[i - 1] {
                Item::Word(w) => {
                    let sub = d[i - 1][j - 1] + substitution_cost(w, &tokens[j - 1]);
                    if sub <= best.0 {
                        best = (sub, Step::Match);
                    }
                    if d[i][j - 1] + 1 < best.0 {
                        best = (d[i][j - 1] + 1, Step::SkipToken);
                    }
                }
                _ => {
                    // prefer the shortest run, i.e. the latest start
                    for k in (0..j).rev() {
                        if d[i - 1][k] < best.0 || (d[i - 1][k] == best.0 && matches!(best.1, Step::SkipItem)) {
                            best = (d[i - 1][k], Step::Absorb(k));
                        }
                    }
                }
            }
            d[i][j] = best.0;
            back[i][j] = best.1;
        }
    }
    let mut capture = None;
    let mut aligned = 0;
    let (mut i, mut j) = (m, n);
    while i > 0 || j > 0 {
        match back[i][j] {
            Step::Match => {
                aligned += 1;
                i -= 1;
                j -= 1;
            }
            Step::SkipItem => i -= 1,
            Step::SkipToken => j -= 1,
            Step::Absorb(k) => {
                if items[i - 1] == Item::Object {
                    capture = Some(tokens[k..j].to_vec());
                }
                i -= 1;
                j = k;
            }
            Step::Start => break,
        }
    }
    (d[m][n], aligned, capture)
}

/// Exact pattern match first (the pattern with the most literal words wins),
/// then the closest fuzzy match within each entry's bound (more aligned words
/// break distance ties). Two different tasks tied at the best score give an
/// ambiguous result.
pub fn match_instruction(phrase: &str, lexicon: &Lexicon) -> Result<InstructionMatch> {
    let tokens = tokenize(phrase);
    if tokens.is_empty() {
        return Err(Error::UnrecognizedInstruction(phrase.to_string()));
    }
    let mut exact_hits: Vec<(usize, TaskType, Option<String>)> = Vec::new();
    for (entry, pats) in lexicon.entries.iter().zip(&lexicon.compiled) {
        for (items, literals) in pats {
            if let Some(cap) = exact(items, &tokens) {
                exact_hits.push((*literals, entry.task, cap.and_then(|c| object_name(&c))));
            }
        }
    }
    if let Some(best) = exact_hits.iter().map(|h| h.0).max() {
        return Ok(collect(exact_hits.into_iter().filter(|h| h.0 == best).map(|h| (h.1, h.2)), 0));
    }
    let mut fuzzy_hits: Vec<((usize, Reverse<usize>), TaskType, Option<String>)> = Vec::new();
    for (entry, pats) in lexicon.entries.iter().zip(&lexicon.compiled) {
        let best = pats
            .iter()
            .map(|(items, _)| fuzzy(items, &tokens))
            .filter(|(d, _, _)| *d <= entry.max_edit_distance)
            .min_by_key(|(d, a, _)| (*d, Reverse(*a)));
        if let Some((d, a, cap)) = best {
            fuzzy_hits.push(((d, Reverse(a)), entry.task, cap.and_then(|c| object_name(&c))));
        }
    }
    let best = fuzzy_hits
        .iter()
        .map(|h| h.0)
        .min()
        .ok_or_else(|| Error::UnrecognizedInstruction(phrase.to_string()))?;
    Ok(collect(fuzzy_hits.into_iter().filter(|h| h.0 == best).map(|h| (h.1, h.2)), best.0))
}

fn collect(hits: impl Iterator<Item = (TaskType, Option<String>)>, distance: usize) -> InstructionMatch {
    let mut candidates: Vec<(TaskType, Option<String>)> = Vec::new();
    for (t, o) in hits {
        if !candidates.iter().any(|c| c.0 == t) {
            candidates.push((t, o));
        }
    }
    if candidates.len() == 1 {
        let (task, object) = candidates.pop().unwrap();
        InstructionMatch::Recognized { task, object, distance }
    } else {
        InstructionMatch::Ambiguous { candidates, distance }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use TaskType::*;

    fn m(p: &str) -> InstructionMatch {
        match_instruction(p, &Lexicon::default()).unwrap()
    }

    fn rec(task: TaskType, object: Option<&str>, distance: usize) -> InstructionMatch {
        InstructionMatch::Recognized { task, object: object.map(String::from), distance }
    }

    #[test]
    fn exact_matches() {
        assert_eq!(m("pick up the box"), rec(PTG11, Some("box"), 0));
        assert_eq!(m("Pick up the box from the desk."), rec(PTG11, Some("box"), 0));
        assert_eq!(m("bring it carefully"), rec(STG12, None, 0));
        assert_eq!(m("place the box on a plate"), rec(PTG13, Some("box"), 0));
        assert_eq!(m("grasp the coffee cup"), rec(Grasp, Some("coffee cup"), 0));
        assert_eq!(m("open the refrigerator"), rec(PTG51, None, 0));
        assert_eq!(m("open the fridge door"), rec(PTG51, None, 0));
        assert_eq!(m("release it"), rec(Release, None, 0));
    }

    #[test]
    fn fuzzy_matches() {
        assert_eq!(m("pik up the box"), rec(PTG11, Some("box"), 1));
        assert_eq!(m("please grasp the box"), rec(Grasp, Some("box"), 1));
        assert_eq!(m("open the refrigerater"), rec(PTG51, None, 1));
    }

    #[test]
    fn unrecognized() {
        assert!(matches!(
            match_instruction("zzqq the table", &Lexicon::default()),
            Err(Error::UnrecognizedInstruction(_))
        ));
        assert!(matches!(match_instruction("", &Lexicon::default()), Err(Error::UnrecognizedInstruction(_))));
    }

    #[test]
    fn ambiguity_is_reported() {
        let lex = Lexicon::new(vec![
            LexiconEntry { patterns: vec!["take the <object>".into()], task: Grasp, max_edit_distance: 1 },
            LexiconEntry { patterns: vec!["take the <object> away".into()], task: PTG11, max_edit_distance: 1 },
            LexiconEntry { patterns: vec!["talk the <object>".into()], task: Release, max_edit_distance: 1 },
        ])
        .unwrap();
        match match_instruction("tak the cup", &lex).unwrap() {
            InstructionMatch::Ambiguous { candidates, distance } => {
                assert_eq!(distance, 1);
                assert_eq!(candidates, vec![(Grasp, Some("cup".into())), (Release, Some("cup".into()))]);
            }
            other => panic!("{other:?}"),
        }
        // exact beats any fuzzy candidate
        assert_eq!(match_instruction("take the cup", &lex).unwrap(), rec(Grasp, Some("cup"), 0));
    }

    #[test]
    fn shared_exact_pattern_rejected() {
        let r = Lexicon::new(vec![
            LexiconEntry { patterns: vec!["do the <object>".into()], task: Grasp, max_edit_distance: 1 },
            LexiconEntry { patterns: vec!["Do the <object>".into()], task: Release, max_edit_distance: 1 },
        ]);
        assert!(r.is_err());
        assert!(Lexicon::new(vec![LexiconEntry { patterns: vec![], task: Grasp, max_edit_distance: 1 }]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let lex = Lexicon::default();
        let text = serde_json::to_string(lex.entries()).unwrap();
        assert_eq!(Lexicon::from_json(&text).unwrap(), lex);
    }
}
