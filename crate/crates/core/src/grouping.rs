//! Grouping of `(frequency, subcomponent)` pairs into named components.
//!
//! Text syntax, groups separated by `;`, selectors by `,`:
//!
//! ```text
//! trend:k=1; cycle:period=96[m=1..3]; seasonal:period=12, period=6
//! ```
//!
//! Selectors: `k=3`, `k=2..5`, `period=12`, `period=inf`, `period>=96`,
//! `period<=24`, `period=24..96`. An optional `[m=...]` suffix restricts the
//! selector to subcomponents (`m=1`, `m=1..3`, `m=1,4`). Periods map to
//! frequency indices by `k = round(L / period) + 1`, rounding half up.
//! Every pair not claimed by a group lands in the reserved group `residual`.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::spectral::num_frequencies;

pub const RESIDUAL: &str = "residual";

#[derive(Debug, Clone, PartialEq)]
pub enum FrequencySelector {
    Index(usize),
    IndexRange(usize, usize),
    /// Single period in samples; infinite selects the trend `k = 1`.
    Period(f64),
    PeriodAtLeast(f64),
    PeriodAtMost(f64),
    PeriodRange(f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupItem {
    pub frequencies: FrequencySelector,
    /// 1-based subcomponent indices; `None` selects all `M`.
    pub subcomponents: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub name: String,
    pub items: Vec<GroupItem>,
}

/// Unresolved grouping as written by the user.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroupingSpec {
    pub groups: Vec<Group>,
}

/// A grouping resolved against `(L, M)`: disjoint groups of `(k, m)` pairs
/// with `k` in `1..=L/2+1`, covering every pair (the last group is `residual`
/// whenever any pair was left unassigned).
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedGrouping {
    pub window: usize,
    pub dim: usize,
    pub groups: Vec<(String, Vec<(usize, usize)>)>,
}

impl ResolvedGrouping {
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.groups.iter().map(|(n, _)| n.as_str())
    }

    pub fn pairs(&self, name: &str) -> Option<&[(usize, usize)]> {
        self.groups
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, p)| p.as_slice())
    }

    /// Name of the group holding `(k, m)`.
    pub fn group_of(&self, k: usize, m: usize) -> Option<&str> {
        self.groups
            .iter()
            .find(|(_, p)| p.contains(&(k, m)))
            .map(|(n, _)| n.as_str())
    }
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

impl FrequencySelector {
    fn frequency_of(period: f64, window: usize) -> usize {
        if period.is_infinite() {
            1
        } else {
            round_half_up(window as f64 / period).saturating_add(1)
        }
    }

    /// Frequency indices selected for window `L`, clipped to `1..=L/2+1`.
    pub fn resolve(&self, window: usize) -> Result<Vec<usize>> {
        let top = num_frequencies(window);
        let (lo, hi) = match *self {
            FrequencySelector::Index(k) => (k, k),
            FrequencySelector::IndexRange(a, b) => (a, b),
            FrequencySelector::Period(p) => {
                let k = Self::frequency_of(p, window);
                (k, k)
            }
            FrequencySelector::PeriodAtLeast(p) => (1, Self::frequency_of(p, window).min(top)),
            FrequencySelector::PeriodAtMost(p) => (Self::frequency_of(p, window), top),
            FrequencySelector::PeriodRange(a, b) => (
                Self::frequency_of(b, window),
                Self::frequency_of(a, window).min(top),
            ),
        };
        if lo == 0 || lo > hi || hi > top {
            return Err(Error::Grouping(format!(
                "selector {self} maps to frequencies {lo}..={hi}, outside 1..={top} for L = {window}"
            )));
        }
        Ok((lo..=hi).collect())
    }
}

impl fmt::Display for FrequencySelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrequencySelector::Index(k) => write!(f, "k={k}"),
            FrequencySelector::IndexRange(a, b) => write!(f, "k={a}..{b}"),
            FrequencySelector::Period(p) if p.is_infinite() => write!(f, "period=inf"),
            FrequencySelector::Period(p) => write!(f, "period={p}"),
            FrequencySelector::PeriodAtLeast(p) => write!(f, "period>={p}"),
            FrequencySelector::PeriodAtMost(p) => write!(f, "period<={p}"),
            FrequencySelector::PeriodRange(a, b) => write!(f, "period={a}..{b}"),
        }
    }
}

impl fmt::Display for GroupingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (g, group) in self.groups.iter().enumerate() {
            if g > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}:", group.name)?;
            for (i, item) in group.items.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{}", item.frequencies)?;
                if let Some(ms) = &item.subcomponents {
                    let list: Vec<String> = ms.iter().map(usize::to_string).collect();
                    write!(f, "[m={}]", list.join(","))?;
                }
            }
        }
        Ok(())
    }
}

impl GroupingSpec {
    /// A single group holding every frequency and subcomponent.
    pub fn all(name: &str) -> Self {
        Self {
            groups: vec![Group {
                name: name.to_string(),
                items: vec![GroupItem {
                    frequencies: FrequencySelector::PeriodAtLeast(0.0),
                    subcomponents: None,
                }],
            }],
        }
    }

    /// One group per listed frequency index, named `k<k>`.
    pub fn frequencies(ks: &[usize]) -> Self {
        Self {
            groups: ks
                .iter()
                .map(|&k| Group {
                    name: format!("k{k}"),
                    items: vec![GroupItem {
                        frequencies: FrequencySelector::Index(k),
                        subcomponents: None,
                    }],
                })
                .collect(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Parser { text }.parse()
    }

    pub fn resolve(&self, window: usize, dim: usize) -> Result<ResolvedGrouping> {
        let top = num_frequencies(window);
        let mut owner: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut overlaps = Vec::new();
        let mut groups = Vec::with_capacity(self.groups.len() + 1);
        for (g, group) in self.groups.iter().enumerate() {
            if group.name == RESIDUAL {
                return Err(Error::Grouping(format!(
                    "group name {RESIDUAL:?} is reserved"
                )));
            }
            if self.groups[..g].iter().any(|o| o.name == group.name) {
                return Err(Error::Grouping(format!(
                    "group {:?} defined twice",
                    group.name
                )));
            }
            let mut pairs = Vec::new();
            for item in &group.items {
                let ms: Vec<usize> = match &item.subcomponents {
                    Some(ms) => {
                        if let Some(&bad) = ms.iter().find(|&&m| m == 0 || m > dim) {
                            return Err(Error::IndexOutOfRange {
                                what: "subcomponent",
                                index: bad,
                                bound: dim,
                            });
                        }
                        ms.clone()
                    }
                    None => (1..=dim).collect(),
                };
                for k in item.frequencies.resolve(window)? {
                    for &m in &ms {
                        if let Some(&prev) = owner.get(&(k, m)) {
                            if prev != g && !overlaps.contains(&(k, m)) {
                                overlaps.push((k, m));
                            }
                        } else {
                            owner.insert((k, m), g);
                            pairs.push((k, m));
                        }
                    }
                }
            }
            if pairs.is_empty() && overlaps.is_empty() {
                return Err(Error::Grouping(format!(
                    "group {:?} selects nothing",
                    group.name
                )));
            }
            pairs.sort_unstable();
            groups.push((group.name.clone(), pairs));
        }
        if !overlaps.is_empty() {
            overlaps.sort_unstable();
            return Err(Error::OverlappingGroups { pairs: overlaps });
        }
        let residual: Vec<(usize, usize)> = (1..=top)
            .flat_map(|k| (1..=dim).map(move |m| (k, m)))
            .filter(|p| !owner.contains_key(p))
            .collect();
        if !residual.is_empty() {
            groups.push((RESIDUAL.to_string(), residual));
        }
        Ok(ResolvedGrouping {
            window,
            dim,
            groups,
        })
    }
}

struct Parser<'a> {
    text: &'a str,
}

impl Parser<'_> {
    fn err(&self, position: usize, message: impl Into<String>) -> Error {
        Error::GroupSyntax {
            position,
            message: message.into(),
        }
    }

    fn parse(&self) -> Result<GroupingSpec> {
        let mut groups = Vec::new();
        for (start, chunk) in split_top(self.text, 0, ';') {
            if chunk.trim().is_empty() {
                continue;
            }
            groups.push(self.group(start, chunk)?);
        }
        if groups.is_empty() {
            return Err(self.err(0, "no groups given"));
        }
        Ok(GroupingSpec { groups })
    }

    fn group(&self, start: usize, chunk: &str) -> Result<Group> {
        let colon = chunk
            .find(':')
            .ok_or_else(|| self.err(start, "expected `name:selectors`"))?;
        let name = chunk[..colon].trim();
        if name.is_empty()
            || !name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return Err(self.err(
                start,
                format!("group name {name:?} must be non-empty [A-Za-z0-9_-]"),
            ));
        }
        let body_start = start + colon + 1;
        let mut items = Vec::new();
        for (pos, item) in split_top(&chunk[colon + 1..], body_start, ',') {
            if item.trim().is_empty() {
                return Err(self.err(pos, "empty selector"));
            }
            items.push(self.item(pos, item)?);
        }
        Ok(Group {
            name: name.to_string(),
            items,
        })
    }

    fn item(&self, pos: usize, raw: &str) -> Result<GroupItem> {
        let text = raw.trim();
        let lead = pos + (raw.len() - raw.trim_start().len());
        let (sel, subs) = match text.find('[') {
            Some(open) => {
                if !text.ends_with(']') {
                    return Err(self.err(lead + open, "unclosed `[`"));
                }
                let inner = &text[open + 1..text.len() - 1];
                (text[..open].trim(), Some((lead + open + 1, inner)))
            }
            None => (text, None),
        };
        let frequencies = self.selector(lead, sel)?;
        let subcomponents = match subs {
            Some((p, inner)) => Some(self.subcomponents(p, inner.trim())?),
            None => None,
        };
        Ok(GroupItem {
            frequencies,
            subcomponents,
        })
    }

    fn selector(&self, pos: usize, sel: &str) -> Result<FrequencySelector> {
        if let Some(rest) = sel.strip_prefix("period") {
            let rest = rest.trim_start();
            if let Some(v) = rest.strip_prefix(">=") {
                return Ok(FrequencySelector::PeriodAtLeast(self.period(pos, v)?));
            }
            if let Some(v) = rest.strip_prefix("<=") {
                return Ok(FrequencySelector::PeriodAtMost(self.period(pos, v)?));
            }
            if let Some(v) = rest.strip_prefix('=') {
                return match v.split_once("..") {
                    Some((a, b)) => {
                        let (a, b) = (self.period(pos, a)?, self.period(pos, b)?);
                        if a > b {
                            return Err(self.err(pos, "period range must be ascending"));
                        }
                        Ok(FrequencySelector::PeriodRange(a, b))
                    }
                    None => Ok(FrequencySelector::Period(self.period(pos, v)?)),
                };
            }
            return Err(self.err(pos, "expected `period=`, `period>=` or `period<=`"));
        }
        if let Some(rest) = sel.strip_prefix('k') {
            let v = rest
                .trim_start()
                .strip_prefix('=')
                .ok_or_else(|| self.err(pos, "expected `k=`"))?;
            return match v.split_once("..") {
                Some((a, b)) => {
                    let (a, b) = (self.index(pos, a)?, self.index(pos, b)?);
                    if a > b {
                        return Err(self.err(pos, "frequency range must be ascending"));
                    }
                    Ok(FrequencySelector::IndexRange(a, b))
                }
                None => Ok(FrequencySelector::Index(self.index(pos, v)?)),
            };
        }
        Err(self.err(pos, format!("unknown selector {sel:?}")))
    }

    fn subcomponents(&self, pos: usize, inner: &str) -> Result<Vec<usize>> {
        let list = inner
            .strip_prefix('m')
            .and_then(|r| r.trim_start().strip_prefix('='))
            .ok_or_else(|| self.err(pos, "expected `[m=...]`"))?;
        let mut out = Vec::new();
        for part in list.split(',') {
            match part.split_once("..") {
                Some((a, b)) => {
                    let (a, b) = (self.index(pos, a)?, self.index(pos, b)?);
                    if a > b || b - a > 1 << 16 {
                        return Err(self.err(pos, "invalid subcomponent range"));
                    }
                    out.extend(a..=b);
                }
                None => out.push(self.index(pos, part)?),
            }
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    fn index(&self, pos: usize, v: &str) -> Result<usize> {
        let v = v.trim();
        match v.parse::<usize>() {
            Ok(0) => Err(self.err(pos, "indices are 1-based")),
            Ok(n) => Ok(n),
            Err(_) => Err(self.err(pos, format!("not an index: {v:?}"))),
        }
    }

    fn period(&self, pos: usize, v: &str) -> Result<f64> {
        let v = v.trim();
        if v.eq_ignore_ascii_case("inf") {
            return Ok(f64::INFINITY);
        }
        match v.parse::<f64>() {
            Ok(p) if p > 0.0 && !p.is_nan() => Ok(p),
            _ => Err(self.err(pos, format!("not a positive period: {v:?}"))),
        }
    }
}

/// Splits on `sep` outside square brackets, yielding byte offsets.
fn split_top(text: &str, base: usize, sep: char) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    for (i, c) in text.char_indices() {
        match c {
            '[' => depth += 1,
            ']' => depth = depth.saturating_sub(1),
            c if c == sep && depth == 0 => {
                out.push((base + start, &text[start..i]));
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    out.push((base + start, &text[start..]));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_mixed_spec() {
        let spec = GroupingSpec::parse("trend:k=1; cycle:period=12").unwrap();
        assert_eq!(spec.groups.len(), 2);
        assert_eq!(
            spec.groups[0].items[0].frequencies,
            FrequencySelector::Index(1)
        );
        assert_eq!(
            spec.groups[1].items[0].frequencies,
            FrequencySelector::Period(12.0)
        );
    }

    #[test]
    fn parses_subcomponent_restriction() {
        let spec = GroupingSpec::parse("a:k=2..4[m=1,3],period>=96[m=1..2]").unwrap();
        let items = &spec.groups[0].items;
        assert_eq!(items.len(), 2);
        assert_eq!(items[0].subcomponents, Some(vec![1, 3]));
        assert_eq!(items[1].frequencies, FrequencySelector::PeriodAtLeast(96.0));
        assert_eq!(items[1].subcomponents, Some(vec![1, 2]));
    }

    #[test]
    fn display_round_trips() {
        let text = "trend:period>=96[m=1,2]; cycle:k=3..5,period=inf; s:period=6..12";
        let spec = GroupingSpec::parse(text).unwrap();
        assert_eq!(GroupingSpec::parse(&spec.to_string()).unwrap(), spec);
    }

    #[test]
    fn syntax_errors() {
        for bad in [
            "",
            "nocolon",
            "a:",
            "a:k=0",
            "a:q=1",
            "a:k=1[m=1",
            "a:period=-3",
            "a:k=3..1",
            " :k=1",
            "a:k=1,,k=2",
        ] {
            assert!(GroupingSpec::parse(bad).is_err(), "{bad:?} should fail");
        }
    }

    #[test]
    fn period_translation() {
        assert_eq!(
            FrequencySelector::Period(12.0).resolve(96).unwrap(),
            vec![9]
        );
        assert_eq!(
            FrequencySelector::Period(96.0).resolve(96).unwrap(),
            vec![2]
        );
        assert_eq!(
            FrequencySelector::Period(f64::INFINITY)
                .resolve(96)
                .unwrap(),
            vec![1]
        );
        assert_eq!(
            FrequencySelector::PeriodAtLeast(48.0).resolve(96).unwrap(),
            vec![1, 2, 3]
        );
        assert_eq!(
            FrequencySelector::PeriodAtMost(24.0).resolve(12).unwrap(),
            vec![2, 3, 4, 5, 6, 7]
        );
        assert_eq!(
            FrequencySelector::PeriodRange(24.0, 48.0)
                .resolve(96)
                .unwrap(),
            vec![3, 4, 5]
        );
        // L / period = 2.5 rounds half up to 3.
        assert_eq!(FrequencySelector::Period(4.0).resolve(10).unwrap(), vec![4]);
        assert!(FrequencySelector::Period(1.0).resolve(12).is_err());
        assert!(FrequencySelector::Index(8).resolve(12).is_err());
    }

    #[test]
    fn resolution_adds_residual() {
        let spec = GroupingSpec::parse("trend:k=1; cycle:k=2[m=1]").unwrap();
        let r = spec.resolve(4, 2).unwrap();
        assert_eq!(r.groups.len(), 3);
        assert_eq!(r.pairs("trend").unwrap(), &[(1, 1), (1, 2)]);
        assert_eq!(r.pairs("cycle").unwrap(), &[(2, 1)]);
        assert_eq!(r.pairs(RESIDUAL).unwrap(), &[(2, 2), (3, 1), (3, 2)]);
        assert_eq!(r.group_of(3, 2), Some(RESIDUAL));
    }

    #[test]
    fn overlapping_groups_listed() {
        let spec = GroupingSpec::parse("a:k=1..2; b:k=2[m=2],k=3").unwrap();
        match spec.resolve(6, 2) {
            Err(Error::OverlappingGroups { pairs }) => assert_eq!(pairs, vec![(2, 2)]),
            other => panic!("expected overlap error, got {other:?}"),
        }
    }

    #[test]
    fn reserved_and_duplicate_names() {
        assert!(GroupingSpec::parse("residual:k=1")
            .unwrap()
            .resolve(8, 1)
            .is_err());
        assert!(GroupingSpec::parse("a:k=1;a:k=2")
            .unwrap()
            .resolve(8, 1)
            .is_err());
        assert!(GroupingSpec::parse("a:k=1[m=3]")
            .unwrap()
            .resolve(8, 2)
            .is_err());
    }

    #[test]
    fn all_group_covers_everything() {
        let r = GroupingSpec::all("all").resolve(7, 3).unwrap();
        assert_eq!(r.groups.len(), 1);
        assert_eq!(r.groups[0].1.len(), 4 * 3);
    }
}
