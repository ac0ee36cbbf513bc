//! Named identity and inequality results.

use serde::{Deserialize, Serialize};

/// How `lhs` is compared with `rhs`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `|lhs - rhs| <= tol`
    Equal,
    /// `lhs >= rhs - tol`
    GreaterEq,
    /// `lhs <= rhs + tol`
    LessEq,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckItem {
    pub name: String,
    pub anchor: String,
    pub relation: Relation,
    pub lhs: f64,
    pub rhs: f64,
    pub tol: f64,
    /// Distance to failure; non-negative iff the check passes.
    pub margin: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckItem {
    pub fn new(
        name: impl Into<String>,
        anchor: impl Into<String>,
        relation: Relation,
        lhs: f64,
        rhs: f64,
        tol: f64,
    ) -> Self {
        let margin = match relation {
            Relation::Equal => tol - (lhs - rhs).abs(),
            Relation::GreaterEq => lhs - rhs + tol,
            Relation::LessEq => rhs - lhs + tol,
        };
        let margin = if margin.is_nan() {
            f64::NEG_INFINITY
        } else {
            margin
        };
        CheckItem {
            name: name.into(),
            anchor: anchor.into(),
            relation,
            lhs,
            rhs,
            tol,
            margin,
            pass: margin >= 0.0,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// An informational row that always passes.
    pub fn info(
        name: impl Into<String>,
        anchor: impl Into<String>,
        value: f64,
        note: impl Into<String>,
    ) -> Self {
        let mut item = CheckItem::new(name, anchor, Relation::Equal, value, value, 0.0);
        item.note = Some(note.into());
        item
    }

    /// A row recording a check that could not be evaluated; never passes.
    pub fn skipped(
        name: impl Into<String>,
        anchor: impl Into<String>,
        reason: impl Into<String>,
    ) -> Self {
        CheckItem {
            name: name.into(),
            anchor: anchor.into(),
            relation: Relation::Equal,
            lhs: f64::NAN,
            rhs: f64::NAN,
            tol: 0.0,
            margin: f64::NEG_INFINITY,
            pass: false,
            note: Some(reason.into()),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub items: Vec<CheckItem>,
}

impl CheckReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, item: CheckItem) {
        self.items.push(item);
    }

    pub fn equal(
        &mut self,
        name: impl Into<String>,
        anchor: impl Into<String>,
        lhs: f64,
        rhs: f64,
        tol: f64,
    ) {
        self.push(CheckItem::new(name, anchor, Relation::Equal, lhs, rhs, tol));
    }

    pub fn at_least(
        &mut self,
        name: impl Into<String>,
        anchor: impl Into<String>,
        lhs: f64,
        rhs: f64,
        tol: f64,
    ) {
        self.push(CheckItem::new(
            name,
            anchor,
            Relation::GreaterEq,
            lhs,
            rhs,
            tol,
        ));
    }

    pub fn at_most(
        &mut self,
        name: impl Into<String>,
        anchor: impl Into<String>,
        lhs: f64,
        rhs: f64,
        tol: f64,
    ) {
        self.push(CheckItem::new(
            name,
            anchor,
            Relation::LessEq,
            lhs,
            rhs,
            tol,
        ));
    }

    pub fn extend(&mut self, other: CheckReport) {
        self.items.extend(other.items);
    }

    pub fn pass(&self) -> bool {
        self.items.iter().all(|i| i.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckItem> {
        self.items.iter().filter(|i| !i.pass)
    }

    /// Smallest margin over all items (`+inf` when empty).
    pub fn worst_margin(&self) -> f64 {
        self.items
            .iter()
            .fold(f64::INFINITY, |m, i| m.min(i.margin))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margins_follow_relation() {
        let eq = CheckItem::new("a", "x", Relation::Equal, 1.0, 1.05, 0.1);
        assert!(eq.pass && (eq.margin - 0.05).abs() < 1e-12);
        let ge = CheckItem::new("b", "x", Relation::GreaterEq, -1e-9, 0.0, 1e-8);
        assert!(ge.pass);
        let le = CheckItem::new("c", "x", Relation::LessEq, 2.0, 1.0, 0.5);
        assert!(!le.pass && le.margin < 0.0);
    }

    #[test]
    fn nan_never_passes() {
        let it = CheckItem::new("n", "x", Relation::Equal, f64::NAN, 0.0, 1.0);
        assert!(!it.pass);
        let mut r = CheckReport::new();
        r.push(CheckItem::skipped("s", "x", "not reached"));
        assert!(!r.pass());
    }

    #[test]
    fn aggregate_is_conjunction() {
        let mut r = CheckReport::new();
        r.equal("a", "x", 0.0, 0.0, 0.0);
        r.at_least("b", "x", 1.0, 0.0, 0.0);
        assert!(r.pass());
        r.at_most("c", "x", 1.0, 0.0, 0.0);
        assert!(!r.pass());
        assert_eq!(r.failures().count(), 1);
    }
}
