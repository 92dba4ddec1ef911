//! Builds the resource tables: `url.tsv` + `page_url.tsv` from raw URL
//! occurrences, and `pub.tsv` + `page_pub.tsv` from citation records.
//!
//! Both assign dense ids in lexicographic order of the canonical key
//! (URL string, identifier-set key), so ids are stable across runs and
//! machines. Entity rows are kept even when every referencing page is
//! unknown; only edges are dropped, so foreign keys hold either way.

use std::path::Path;

use crate::citations::CitationRecord;
use crate::extsort::ExternalSorter;
use crate::graph::records::{EntityEdgeRec, PageIdProbe, PubOccurrenceRec, UrlOccurrenceRec};
use crate::graph::{
    BuildLimits, Counters, GraphError, PAGE_PUB_HEADER, PAGE_URL_HEADER, PUB_HEADER_PREFIX,
    URL_HEADER,
};
use crate::normalize::{
    domain_of, normalize_url, pub_identity_key, IdentifierError, IdentifierPair,
    IdentifierVocabulary, UrlRules,
};
use crate::tsv::TsvWriter;

/// One raw URL occurrence on a page, from either the external-links
/// dump (`in_reference = false`) or the citations dataset (`true`).
#[derive(Debug, Clone)]
pub struct UrlInput {
    pub page_id: u64,
    pub raw_url: String,
    pub in_reference: bool,
}

pub struct UrlOutputs<'a> {
    pub url: &'a Path,
    pub page_url: &'a Path,
    /// Unparseable URLs land here with their reason, one row each.
    pub rejects: &'a Path,
}

pub const URL_REJECT_HEADER: [&str; 3] = ["source", "original_url", "reason"];

pub fn build_url_tables(
    inputs: impl IntoIterator<Item = Result<UrlInput, GraphError>>,
    rules: &UrlRules,
    graph_dir: &Path,
    outputs: &UrlOutputs,
    limits: &BuildLimits,
    counters: &mut Counters,
) -> Result<(), GraphError> {
    let mut sorter =
        ExternalSorter::<UrlOccurrenceRec>::new(limits.sort_budget_bytes, &limits.tmp_dir)?;
    let mut rejects = TsvWriter::create(outputs.rejects, &URL_REJECT_HEADER)?;
    let mut rows_in = 0u64;
    for input in inputs {
        let input = input?;
        rows_in += 1;
        match normalize_url(&input.raw_url, rules) {
            Ok(canonical) => sorter.push(UrlOccurrenceRec {
                url: canonical.url,
                page: input.page_id,
                in_reference: input.in_reference,
            })?,
            Err(e) => {
                counters.bump("url.rejected");
                let reason = e.reason.to_string();
                rejects.write_row(&[
                    if input.in_reference {
                        "citations"
                    } else {
                        "externallinks"
                    },
                    input.raw_url.as_str(),
                    reason.as_str(),
                ])?;
            }
        }
    }
    rejects.finish()?;

    // Pass 1: assign url ids in lexicographic order; fold duplicate
    // (url, page) occurrences, OR-ing the reference flag.
    let mut edge_sorter =
        ExternalSorter::<EntityEdgeRec>::new(limits.sort_budget_bytes, &limits.tmp_dir)?;
    {
        let mut urls = TsvWriter::create(outputs.url, &URL_HEADER)?;
        let mut next_id = 0u64;
        let mut current: Option<(String, u64, u64, bool)> = None; // url, id, page, flag
        let flush_edge = |edge: &mut Option<(String, u64, u64, bool)>,
                              sorter: &mut ExternalSorter<EntityEdgeRec>|
         -> Result<(), GraphError> {
            if let Some((_, id, page, in_ref)) = edge.take() {
                sorter.push(EntityEdgeRec {
                    page,
                    entity: id,
                    in_reference: in_ref,
                })?;
            }
            Ok(())
        };
        for rec in sorter.finish()? {
            let rec = rec?;
            let same_url = matches!(&current, Some((u, ..)) if *u == rec.url);
            if !same_url {
                flush_edge(&mut current, &mut edge_sorter)?;
                next_id += 1;
                let id_str = next_id.to_string();
                urls.write_row(&[id_str.as_str(), &rec.url, domain_of(&rec.url)])?;
                current = Some((rec.url, next_id, rec.page, rec.in_reference));
                continue;
            }
            let cur = current.as_mut().unwrap();
            if cur.2 == rec.page {
                cur.3 |= rec.in_reference;
                counters.bump("page_url.deduplicated");
            } else {
                let id = cur.1;
                let url = cur.0.clone();
                flush_edge(&mut current, &mut edge_sorter)?;
                current = Some((url, id, rec.page, rec.in_reference));
            }
        }
        flush_edge(&mut current, &mut edge_sorter)?;
        counters.set("url.rows", urls.finish()?);
    }

    // Pass 2: final (page, url) order, validate sources.
    {
        let mut writer = TsvWriter::create(outputs.page_url, &PAGE_URL_HEADER)?;
        let mut probe = PageIdProbe::open(graph_dir)?;
        for rec in edge_sorter.finish()? {
            let rec = rec?;
            if !probe.contains(rec.page)? {
                counters.bump("page_url.dropped_unknown_page");
                continue;
            }
            writer.write_row(&[
                rec.page.to_string(),
                rec.entity.to_string(),
                if rec.in_reference { "1" } else { "0" }.to_string(),
            ])?;
        }
        counters.set("page_url.rows", writer.finish()?);
    }

    counters.set("url.occurrences_in", rows_in);
    debug_assert_eq!(
        rows_in,
        counters.get("page_url.rows")
            + counters.get("url.rejected")
            + counters.get("page_url.deduplicated")
            + counters.get("page_url.dropped_unknown_page"),
        "url conservation"
    );
    Ok(())
}

pub struct PubOutputs<'a> {
    pub publication: &'a Path,
    pub page_pub: &'a Path,
}

/// Count one identifier-normalization failure.
fn count_identifier_error(counters: &mut Counters, err: &IdentifierError) {
    let key = match err {
        IdentifierError::InvalidDoi { .. } => "pub.invalid_doi",
        IdentifierError::InvalidIsbn { .. } => "pub.invalid_isbn",
        IdentifierError::UnknownScheme(_) => "pub.unknown_scheme",
        IdentifierError::EmptyValue(_) => "pub.empty_value",
        IdentifierError::ControlCharacter(_) => "pub.control_character",
        IdentifierError::EmptyIdentifierSet => "pub.empty_identifier_set",
    };
    counters.bump(key);
}

/// For each scheme column, the value shown is the widest (longest,
/// then lexicographically largest) among the key's values for that
/// scheme; the key itself keeps every pair.
fn scheme_columns(pairs: &[IdentifierPair], vocab: &IdentifierVocabulary) -> Vec<String> {
    vocab
        .schemes()
        .iter()
        .map(|scheme| {
            pairs
                .iter()
                .filter(|p| &p.scheme == scheme)
                .map(|p| p.value.clone())
                .max_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)))
                .unwrap_or_default()
        })
        .collect()
}

pub fn build_pub_tables(
    citations: impl IntoIterator<Item = Result<CitationRecord, GraphError>>,
    vocab: &IdentifierVocabulary,
    graph_dir: &Path,
    outputs: &PubOutputs,
    limits: &BuildLimits,
    counters: &mut Counters,
) -> Result<(), GraphError> {
    let mut sorter =
        ExternalSorter::<PubOccurrenceRec>::new(limits.sort_budget_bytes, &limits.tmp_dir)?;
    for record in citations {
        let record = record?;
        counters.bump("pub.citation_rows");
        let mut pairs: Vec<IdentifierPair> = Vec::new();
        for (scheme, raw) in &record.identifiers {
            match crate::normalize::normalize_identifier(scheme, raw, vocab) {
                Ok(pair) => pairs.push(pair),
                Err(e) => count_identifier_error(counters, &e),
            }
        }
        match pub_identity_key(&pairs) {
            Ok(key) => sorter.push(PubOccurrenceRec {
                key: key.as_str().to_string(),
                page: record.source_page_id,
            })?,
            Err(_) => counters.bump("pub.rows_without_identifiers"),
        }
    }

    let header: Vec<&str> = PUB_HEADER_PREFIX
        .iter()
        .copied()
        .chain(vocab.schemes().iter().map(|s| s.as_str()))
        .collect();

    let mut edge_sorter =
        ExternalSorter::<EntityEdgeRec>::new(limits.sort_budget_bytes, &limits.tmp_dir)?;
    {
        let mut pubs = TsvWriter::create(outputs.publication, &header)?;
        let mut next_id = 0u64;
        let mut current: Option<(String, u64, u64)> = None; // key, id, page
        for rec in sorter.finish()? {
            let rec = rec?;
            let same_key = matches!(&current, Some((k, ..)) if *k == rec.key);
            if !same_key {
                if let Some((_, id, page)) = current.take() {
                    edge_sorter.push(EntityEdgeRec {
                        page,
                        entity: id,
                        in_reference: true,
                    })?;
                }
                next_id += 1;
                let parsed = crate::normalize::IdentifierSetKey::from_key_string(&rec.key);
                let pairs: Vec<IdentifierPair> = parsed.pairs().collect();
                let mut seen = std::collections::HashSet::new();
                for p in &pairs {
                    if !seen.insert(&p.scheme) {
                        counters.bump("pub.multi_value_schemes");
                    }
                }
                let mut row = vec![next_id.to_string(), rec.key.clone()];
                row.extend(scheme_columns(&pairs, vocab));
                pubs.write_row(&row)?;
                current = Some((rec.key, next_id, rec.page));
                continue;
            }
            let cur = current.as_mut().unwrap();
            if cur.2 == rec.page {
                counters.bump("page_pub.deduplicated");
            } else {
                edge_sorter.push(EntityEdgeRec {
                    page: cur.2,
                    entity: cur.1,
                    in_reference: true,
                })?;
                cur.2 = rec.page;
            }
        }
        if let Some((_, id, page)) = current.take() {
            edge_sorter.push(EntityEdgeRec {
                page,
                entity: id,
                in_reference: true,
            })?;
        }
        counters.set("pub.rows", pubs.finish()?);
    }

    {
        let mut writer = TsvWriter::create(outputs.page_pub, &PAGE_PUB_HEADER)?;
        let mut probe = PageIdProbe::open(graph_dir)?;
        for rec in edge_sorter.finish()? {
            let rec = rec?;
            if !probe.contains(rec.page)? {
                counters.bump("page_pub.dropped_unknown_page");
                continue;
            }
            writer.write_row(&[rec.page.to_string(), rec.entity.to_string()])?;
        }
        counters.set("page_pub.rows", writer.finish()?);
    }
    Ok(())
}
