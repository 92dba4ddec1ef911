//! Editorial quality classes and per-project assessments.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use crate::tsv::TsvReader;

use super::AnalysisError;

/// Assessment grades, best to worst. Declaration order is the
/// column order of every per-class table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QualityClass {
    FeaturedArticle,
    FeaturedList,
    A,
    GoodArticle,
    B,
    C,
    List,
    Start,
    Stub,
}

impl QualityClass {
    pub const ALL: [QualityClass; 9] = [
        QualityClass::FeaturedArticle,
        QualityClass::FeaturedList,
        QualityClass::A,
        QualityClass::GoodArticle,
        QualityClass::B,
        QualityClass::C,
        QualityClass::List,
        QualityClass::Start,
        QualityClass::Stub,
    ];

    pub fn label(self) -> &'static str {
        match self {
            QualityClass::FeaturedArticle => "FA",
            QualityClass::FeaturedList => "FL",
            QualityClass::A => "A",
            QualityClass::GoodArticle => "GA",
            QualityClass::B => "B",
            QualityClass::C => "C",
            QualityClass::List => "List",
            QualityClass::Start => "Start",
            QualityClass::Stub => "Stub",
        }
    }

    /// Parses a grade label as written in assessment dumps:
    /// case-insensitive, ignores spaces/underscores/hyphens and a
    /// trailing "class" ("FA-Class", "good article", "stub").
    pub fn parse(raw: &str) -> Option<QualityClass> {
        let mut key: String = raw
            .chars()
            .filter(|c| !matches!(c, ' ' | '_' | '-'))
            .flat_map(char::to_lowercase)
            .collect();
        if let Some(stripped) = key.strip_suffix("class") {
            // "class" alone is not a grade.
            if !stripped.is_empty() {
                key = stripped.to_string();
            }
        }
        match key.as_str() {
            "fa" | "featuredarticle" | "featured" => Some(QualityClass::FeaturedArticle),
            "fl" | "featuredlist" => Some(QualityClass::FeaturedList),
            "a" => Some(QualityClass::A),
            "ga" | "good" | "goodarticle" => Some(QualityClass::GoodArticle),
            "b" => Some(QualityClass::B),
            "c" => Some(QualityClass::C),
            "list" => Some(QualityClass::List),
            "start" => Some(QualityClass::Start),
            "stub" => Some(QualityClass::Stub),
            _ => None,
        }
    }
}

/// One project's grade for one article.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QualityAssessment {
    pub page_id: u64,
    pub project: String,
    pub class: QualityClass,
    pub importance: String,
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct AssessmentStats {
    pub rows: u64,
    pub kept: u64,
    pub skipped_unknown_class: u64,
    pub skipped_bad_row: u64,
}

/// Reads a `page_id <tab> project <tab> class <tab> importance`
/// file. A first line starting with `page_id` is taken as a header.
/// Rows with unparseable ids or unknown grades are skipped and
/// counted, not fatal: assessment dumps carry project-local grades
/// (Draft, NA, Future) outside the common scale.
pub fn read_assessments(
    path: &Path,
) -> Result<(Vec<QualityAssessment>, AssessmentStats), AnalysisError> {
    let mut reader = TsvReader::open(path)?;
    let mut out = Vec::new();
    let mut stats = AssessmentStats::default();
    let mut first = true;
    while let Some(row) = reader.next_row()? {
        if first {
            first = false;
            if row.first().map(String::as_str) == Some("page_id") {
                continue;
            }
        }
        stats.rows += 1;
        if row.len() < 3 {
            stats.skipped_bad_row += 1;
            continue;
        }
        let Ok(page_id) = row[0].parse::<u64>() else {
            stats.skipped_bad_row += 1;
            continue;
        };
        let Some(class) = QualityClass::parse(&row[2]) else {
            stats.skipped_unknown_class += 1;
            continue;
        };
        stats.kept += 1;
        out.push(QualityAssessment {
            page_id,
            project: row[1].clone(),
            class,
            importance: row.get(3).cloned().unwrap_or_default(),
        });
    }
    Ok((out, stats))
}

/// Every class any project assigned to each article. Projects
/// disagree, so membership is a set, not a single grade.
pub fn class_membership(
    assessments: &[QualityAssessment],
) -> HashMap<u64, BTreeSet<QualityClass>> {
    let mut map: HashMap<u64, BTreeSet<QualityClass>> = HashMap::new();
    for a in assessments {
        map.entry(a.page_id).or_default().insert(a.class);
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    #[test]
    fn parses_label_spellings() {
        assert_eq!(QualityClass::parse("FA"), Some(QualityClass::FeaturedArticle));
        assert_eq!(QualityClass::parse("FA-Class"), Some(QualityClass::FeaturedArticle));
        assert_eq!(QualityClass::parse("featured article"), Some(QualityClass::FeaturedArticle));
        assert_eq!(QualityClass::parse("fl"), Some(QualityClass::FeaturedList));
        assert_eq!(QualityClass::parse("A_Class"), Some(QualityClass::A));
        assert_eq!(QualityClass::parse("Good article"), Some(QualityClass::GoodArticle));
        assert_eq!(QualityClass::parse("ga"), Some(QualityClass::GoodArticle));
        assert_eq!(QualityClass::parse("b-class"), Some(QualityClass::B));
        assert_eq!(QualityClass::parse("Stub"), Some(QualityClass::Stub));
        assert_eq!(QualityClass::parse("List-Class"), Some(QualityClass::List));
        assert_eq!(QualityClass::parse("Draft"), None);
        assert_eq!(QualityClass::parse("NA"), None);
        assert_eq!(QualityClass::parse(""), None);
        assert_eq!(QualityClass::parse("class"), None);
    }

    #[test]
    fn order_matches_declared_scale() {
        assert!(QualityClass::FeaturedArticle < QualityClass::GoodArticle);
        assert!(QualityClass::GoodArticle < QualityClass::Stub);
        let labels: Vec<&str> = QualityClass::ALL.iter().map(|c| c.label()).collect();
        assert_eq!(labels, ["FA", "FL", "A", "GA", "B", "C", "List", "Start", "Stub"]);
    }

    #[test]
    fn reads_file_and_skips_unknown_grades() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("assessments.tsv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "page_id\tproject\tclass\timportance").unwrap();
        writeln!(f, "10\tChemistry\tB-Class\tHigh").unwrap();
        writeln!(f, "10\tPhysics\tC\tMid").unwrap();
        writeln!(f, "11\tChemistry\tDraft\tLow").unwrap();
        writeln!(f, "x\tChemistry\tB\tLow").unwrap();
        writeln!(f, "12\tLists\tFL\t").unwrap();
        drop(f);

        let (rows, stats) = read_assessments(&path).unwrap();
        assert_eq!(stats.rows, 5);
        assert_eq!(stats.kept, 3);
        assert_eq!(stats.skipped_unknown_class, 1);
        assert_eq!(stats.skipped_bad_row, 1);
        assert_eq!(rows[0].page_id, 10);
        assert_eq!(rows[0].class, QualityClass::B);
        assert_eq!(rows[0].importance, "High");
        assert_eq!(rows[2].class, QualityClass::FeaturedList);

        let members = class_membership(&rows);
        assert_eq!(
            members[&10],
            BTreeSet::from([QualityClass::B, QualityClass::C])
        );
        assert_eq!(members[&12], BTreeSet::from([QualityClass::FeaturedList]));
        assert!(!members.contains_key(&11));
    }
}
