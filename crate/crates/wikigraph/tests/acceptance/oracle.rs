//! Brute-force reference implementations backing the release-gate tests.
//!
//! Nothing in this module calls into the library. The SQL tuple scanner,
//! XML reader, URL/identifier cleaners, calendar arithmetic and rank
//! statistics are reimplemented here in the most literal way that could
//! possibly work, so a disagreement with the streaming implementations
//! points at a real bug and not at shared code.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::Read;
use std::path::Path;

// --------------------------------------------------------------------------
// Revision tallying
// --------------------------------------------------------------------------

/// One revision as plain data: `(page_id, epoch_seconds, identity_tag)`.
/// Tags are `R:<id-or-name>`, `A:<ip>` or `D`; the prefixes keep the three
/// contributor kinds from colliding.
pub type PlainEvent = (u64, i64, String);

#[derive(Debug, PartialEq, Eq)]
pub struct TallyExpect {
    pub edits: u64,
    pub editors: u64,
    pub created: i64,
}

/// Count edits, distinct identity tags and the minimum timestamp per page.
pub fn tally_by_hand(events: &[PlainEvent]) -> BTreeMap<u64, TallyExpect> {
    let mut edits: BTreeMap<u64, u64> = BTreeMap::new();
    let mut editors: BTreeMap<u64, BTreeSet<&str>> = BTreeMap::new();
    let mut created: BTreeMap<u64, i64> = BTreeMap::new();
    for (page, ts, tag) in events {
        *edits.entry(*page).or_insert(0) += 1;
        editors.entry(*page).or_default().insert(tag);
        created
            .entry(*page)
            .and_modify(|c| *c = (*c).min(*ts))
            .or_insert(*ts);
    }
    edits
        .iter()
        .map(|(&page, &e)| {
            (
                page,
                TallyExpect {
                    edits: e,
                    editors: editors[&page].len() as u64,
                    created: created[&page],
                },
            )
        })
        .collect()
}

// --------------------------------------------------------------------------
// ISBN check digits
// --------------------------------------------------------------------------

/// ISBN-10 check digit value (0..=10, where 10 prints as X) for nine data
/// digits, from the defining congruence sum(weight_i * digit_i) ≡ 0 mod 11
/// with weights 10 down to 1.
pub fn isbn10_check(d9: &[u8; 9]) -> u8 {
    let sum: u32 = d9
        .iter()
        .enumerate()
        .map(|(i, &d)| (10 - i as u32) * d as u32)
        .sum();
    ((11 - sum % 11) % 11) as u8
}

/// The ISBN-13 a valid ISBN-10 with these data digits must normalize to:
/// 978 prefix, the nine data digits, EAN-13 check digit (weights 1,3).
pub fn expected_isbn13(d9: &[u8; 9]) -> String {
    let mut s = String::from("978");
    for &d in d9 {
        s.push((b'0' + d) as char);
    }
    let sum: u32 = s
        .bytes()
        .enumerate()
        .map(|(i, b)| (b - b'0') as u32 * if i % 2 == 0 { 1 } else { 3 })
        .sum();
    s.push((b'0' + ((10 - sum % 10) % 10) as u8) as char);
    s
}

// --------------------------------------------------------------------------
// Rank statistics
// --------------------------------------------------------------------------

/// Mid-rank of each value by direct counting (O(n²), no sorting):
/// rank = |{y < x}| + (|{y == x}| + 1) / 2, ranks starting at 1.
pub fn midranks_by_counting(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let less = v.iter().filter(|&&y| y < x).count() as f64;
            let equal = v.iter().filter(|&&y| y == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Textbook two-pass Pearson correlation.
pub fn pearson_by_hand(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for i in 0..x.len() {
        cov += (x[i] - mx) * (y[i] - my);
        vx += (x[i] - mx) * (x[i] - mx);
        vy += (y[i] - my) * (y[i] - my);
    }
    cov / (vx * vy).sqrt()
}

/// Spearman's rho as Pearson over mid-ranks.
pub fn spearman_by_hand(x: &[f64], y: &[f64]) -> f64 {
    pearson_by_hand(&midranks_by_counting(x), &midranks_by_counting(y))
}

// --------------------------------------------------------------------------
// Calendar arithmetic (no chrono)
// --------------------------------------------------------------------------

/// Days since 1970-01-01 for a proleptic Gregorian date.
pub fn days_from_civil(y: i64, m: u32, d: u32) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = (y - era * 400) as u64;
    let doy = (153 * ((m as u64 + 9) % 12) + 2) / 5 + d as u64 - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146097 + doe as i64 - 719468
}

/// `YYYY-MM-DD` (a prefix of an ISO timestamp also works) -> day number.
pub fn date_days(s: &str) -> i64 {
    let y: i64 = s[0..4].parse().unwrap();
    let m: u32 = s[5..7].parse().unwrap();
    let d: u32 = s[8..10].parse().unwrap();
    days_from_civil(y, m, d)
}

/// First run of eight digits in a file name, read as a date.
pub fn date_days_from_name(name: &str) -> i64 {
    let b = name.as_bytes();
    let mut run = 0;
    for (i, &c) in b.iter().enumerate() {
        if c.is_ascii_digit() {
            run += 1;
            if run == 8 {
                let s = &name[i + 1 - 8..i + 1];
                return days_from_civil(
                    s[0..4].parse().unwrap(),
                    s[4..6].parse().unwrap(),
                    s[6..8].parse().unwrap(),
                );
            }
        } else {
            run = 0;
        }
    }
    panic!("no date in file name {name}");
}

// --------------------------------------------------------------------------
// Raw input readers
// --------------------------------------------------------------------------

/// Whole file as text; `.gz` names are gunzipped.
pub fn read_input(path: &Path) -> String {
    let bytes = fs::read(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()));
    if path.extension().is_some_and(|e| e == "gz") {
        let mut s = String::new();
        flate2::read::GzDecoder::new(&bytes[..])
            .read_to_string(&mut s)
            .unwrap();
        s
    } else {
        String::from_utf8(bytes).unwrap()
    }
}

/// Every INSERT tuple for `table`, scanned directly off the dump text.
/// NULL becomes an empty cell, numbers keep their literal text, quoted
/// strings are unescaped.
pub fn sql_tuples(text: &str, table: &str) -> Vec<Vec<String>> {
    let needle = format!("INSERT INTO `{table}` VALUES ");
    let b = text.as_bytes();
    let mut rows = Vec::new();
    let mut at = 0;
    while let Some(hit) = text[at..].find(&needle) {
        let mut i = at + hit + needle.len();
        loop {
            while i < b.len() && matches!(b[i], b',' | b' ' | b'\n' | b'\r') {
                i += 1;
            }
            if i >= b.len() || b[i] == b';' {
                i += 1;
                break;
            }
            assert_eq!(b[i], b'(', "tuple must open at byte {i}");
            i += 1;
            let mut row = Vec::new();
            loop {
                if b[i] == b'\'' {
                    i += 1;
                    let mut s = String::new();
                    loop {
                        match b[i] {
                            b'\\' => {
                                s.push(match b[i + 1] {
                                    b'n' => '\n',
                                    b't' => '\t',
                                    b'r' => '\r',
                                    b'0' => '\0',
                                    other => other as char, // \' \" \\
                                });
                                i += 2;
                            }
                            b'\'' => {
                                i += 1;
                                break;
                            }
                            _ => {
                                let c = text[i..].chars().next().unwrap();
                                s.push(c);
                                i += c.len_utf8();
                            }
                        }
                    }
                    row.push(s);
                } else {
                    let start = i;
                    while !matches!(b[i], b',' | b')') {
                        i += 1;
                    }
                    let tok = text[start..i].trim();
                    row.push(if tok.eq_ignore_ascii_case("NULL") {
                        String::new()
                    } else {
                        tok.to_string()
                    });
                }
                if b[i] == b',' {
                    i += 1;
                    continue;
                }
                assert_eq!(b[i], b')', "tuple must close at byte {i}");
                i += 1;
                break;
            }
            rows.push(row);
        }
        at = i;
    }
    rows
}

fn unescape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        rest = &rest[amp..];
        let Some(semi) = rest.find(';') else {
            out.push('&');
            rest = &rest[1..];
            continue;
        };
        let replacement = match &rest[1..semi] {
            "amp" => Some('&'),
            "lt" => Some('<'),
            "gt" => Some('>'),
            "quot" => Some('"'),
            "apos" => Some('\''),
            ent => {
                if let Some(hex) = ent.strip_prefix("#x").or_else(|| ent.strip_prefix("#X")) {
                    u32::from_str_radix(hex, 16).ok().and_then(char::from_u32)
                } else if let Some(dec) = ent.strip_prefix('#') {
                    dec.parse::<u32>().ok().and_then(char::from_u32)
                } else {
                    None
                }
            }
        };
        match replacement {
            Some(c) => {
                out.push(c);
                rest = &rest[semi + 1..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn tag_text<'a>(s: &'a str, tag: &str) -> Option<&'a str> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let i = s.find(&open)? + open.len();
    let j = i + s[i..].find(&close)?;
    Some(&s[i..j])
}

pub struct XmlPage {
    pub id: u64,
    pub ns: i32,
    /// Title as written in the export: spaces, namespace prefix included.
    pub title: String,
    /// `(iso_timestamp, identity_tag)` per revision, in document order.
    pub revisions: Vec<(String, String)>,
}

/// String-scan of a history export: one entry per `<page>` block.
pub fn xml_pages(xml: &str) -> Vec<XmlPage> {
    let mut out = Vec::new();
    let mut at = 0;
    while let Some(open) = xml[at..].find("<page>") {
        let start = at + open + "<page>".len();
        let end = start + xml[start..].find("</page>").expect("unclosed <page>");
        let block = &xml[start..end];
        at = end + "</page>".len();

        // The page header precedes the first revision; the header <id> is
        // the page id (revisions have their own <id> children).
        let head = &block[..block.find("<revision>").unwrap_or(block.len())];
        let title = unescape_xml(tag_text(head, "title").expect("page without title"));
        let ns: i32 = tag_text(head, "ns").expect("page without ns").trim().parse().unwrap();
        let id: u64 = tag_text(head, "id").expect("page without id").trim().parse().unwrap();

        let mut revisions = Vec::new();
        let mut rat = 0;
        while let Some(ro) = block[rat..].find("<revision>") {
            let rs = rat + ro + "<revision>".len();
            let re = rs + block[rs..].find("</revision>").expect("unclosed <revision>");
            let rev = &block[rs..re];
            rat = re + "</revision>".len();
            let ts = tag_text(rev, "timestamp").expect("revision without timestamp");
            revisions.push((ts.trim().to_string(), contributor_tag(rev)));
        }
        out.push(XmlPage { id, ns, title, revisions });
    }
    out
}

/// Identity tag of a revision's contributor. Deletions are a self-closing
/// `<contributor deleted="deleted" />`; registered users go by numeric id
/// when present, else by name; anonymous edits go by IP.
fn contributor_tag(rev: &str) -> String {
    let c = rev.find("<contributor").expect("revision without contributor");
    let tag_end = c + rev[c..].find('>').unwrap();
    if rev[c..=tag_end].contains("deleted=\"deleted\"") {
        return "D".to_string();
    }
    let body_end = tag_end + rev[tag_end..].find("</contributor>").unwrap();
    let body = &rev[tag_end + 1..body_end];
    if let Some(ip) = tag_text(body, "ip") {
        return format!("A:{}", ip.trim());
    }
    if let Some(id) = tag_text(body, "id") {
        return format!("R:{}", id.trim());
    }
    let name = tag_text(body, "username").expect("contributor without identity");
    format!("R:{}", unescape_xml(name.trim()))
}

// --------------------------------------------------------------------------
// Normalization ports (titles, identifiers, URLs)
// --------------------------------------------------------------------------

/// Database title form: spaces to underscores, first letter upper-cased
/// when its uppercase form is a single character.
pub fn norm_title(raw: &str) -> String {
    let s = raw.replace(' ', "_");
    let mut cs = s.chars();
    let Some(first) = cs.next() else { return s };
    let ups: Vec<char> = first.to_uppercase().collect();
    if ups.len() == 1 && ups[0] != first {
        let mut out = String::with_capacity(s.len());
        out.push(ups[0]);
        out.push_str(cs.as_str());
        out
    } else {
        s
    }
}

const DOI_PREFIXES: [&str; 9] = [
    "doi:",
    "https://doi.org/",
    "http://doi.org/",
    "https://dx.doi.org/",
    "http://dx.doi.org/",
    "https://www.doi.org/",
    "http://www.doi.org/",
    "doi.org/",
    "dx.doi.org/",
];

pub fn norm_doi(raw: &str) -> Option<String> {
    let mut s = raw.trim();
    loop {
        let before = s;
        s = s.trim();
        for p in DOI_PREFIXES {
            if s.len() >= p.len() && s[..p.len()].eq_ignore_ascii_case(p) {
                s = &s[p.len()..];
                break;
            }
        }
        if s == before {
            break;
        }
    }
    let s = s.trim_end_matches(['.', ',', ';', ')']).to_lowercase();
    let rest = s.strip_prefix("10.")?;
    let slash = rest.find('/')?;
    let (registrant, suffix) = (&rest[..slash], &rest[slash + 1..]);
    if registrant.is_empty() || suffix.is_empty() {
        return None;
    }
    if !registrant
        .split('.')
        .all(|g| !g.is_empty() && g.bytes().all(|b| b.is_ascii_digit()))
    {
        return None;
    }
    if s.chars().any(|c| c.is_whitespace() || c.is_control()) {
        return None;
    }
    Some(s)
}

fn isbn13_check_str(d12: &str) -> char {
    let sum: u32 = d12
        .bytes()
        .enumerate()
        .map(|(i, b)| (b - b'0') as u32 * if i % 2 == 0 { 1 } else { 3 })
        .sum();
    (b'0' + ((10 - sum % 10) % 10) as u8) as char
}

pub fn norm_isbn(raw: &str) -> Option<String> {
    let mut s = raw.trim();
    for p in ["isbn-13", "isbn-10", "isbn13", "isbn10", "isbn"] {
        if s.len() >= p.len() && s[..p.len()].eq_ignore_ascii_case(p) {
            s = s[p.len()..].trim_start_matches([':', ' ']);
            break;
        }
    }
    let digits: String = s
        .chars()
        .filter(|c| !matches!(c, '-' | ' ' | '\u{2010}'..='\u{2015}'))
        .map(|c| c.to_ascii_uppercase())
        .collect();
    match digits.len() {
        10 => {
            let mut total = 0u32;
            for (i, c) in digits.chars().enumerate() {
                let v = match c {
                    'X' if i == 9 => 10,
                    c if c.is_ascii_digit() => c as u32 - '0' as u32,
                    _ => return None,
                };
                total += v * (10 - i as u32);
            }
            if total % 11 != 0 {
                return None;
            }
            let d12 = format!("978{}", &digits[..9]);
            let check = isbn13_check_str(&d12);
            Some(format!("{d12}{check}"))
        }
        13 => {
            if !digits.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            if digits.chars().nth(12) != Some(isbn13_check_str(&digits[..12])) {
                return None;
            }
            Some(digits)
        }
        _ => None,
    }
}

fn norm_plain(raw: &str) -> Option<String> {
    let s = raw.trim();
    if s.is_empty() || s.chars().any(char::is_control) {
        return None;
    }
    Some(s.to_string())
}

pub fn norm_identifier(scheme: &str, raw: &str) -> Option<String> {
    match scheme {
        "doi" => norm_doi(raw),
        "isbn" => norm_isbn(raw),
        _ => norm_plain(raw),
    }
}

/// Sorted, deduplicated `scheme:value` pairs joined by the unit separator.
pub fn identity_key(pairs: &[(String, String)]) -> Option<String> {
    if pairs.is_empty() {
        return None;
    }
    let mut sorted: Vec<&(String, String)> = pairs.iter().collect();
    sorted.sort();
    sorted.dedup();
    Some(
        sorted
            .iter()
            .map(|(s, v)| format!("{s}:{v}"))
            .collect::<Vec<_>>()
            .join("\u{1f}"),
    )
}

const WAYBACK_HOSTS: [&str; 2] = ["web.archive.org", "archive.org"];
const TODAY_HOSTS: [&str; 7] = [
    "archive.today",
    "archive.ph",
    "archive.is",
    "archive.li",
    "archive.md",
    "archive.vn",
    "archive.fo",
];

#[derive(Debug, Clone)]
pub enum PlainRule {
    KeepParams(Vec<String>),
    StripFragment,
}

/// The two rule kinds the fixture uses, read straight from the rule file.
pub fn parse_rule_file(text: &str) -> HashMap<String, PlainRule> {
    let mut rules = HashMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let domain = parts.next().unwrap().to_lowercase();
        let kind = parts.next().expect("rule without kind");
        match kind {
            "keep_params" => {
                let params = parts
                    .next()
                    .expect("keep_params without args")
                    .split(',')
                    .map(str::to_string)
                    .collect();
                rules.insert(domain, PlainRule::KeepParams(params));
            }
            "strip_fragment" => {
                rules.insert(domain, PlainRule::StripFragment);
            }
            other => panic!("rule kind {other} not supported by the oracle"),
        }
    }
    rules
}

fn split_authority(u: &str) -> (&str, &str) {
    match u.find(['/', '?', '#']) {
        Some(i) => (&u[..i], &u[i..]),
        None => (u, ""),
    }
}

fn host_of(auth: &str) -> &str {
    let h = match auth.rfind('@') {
        Some(i) => &auth[i + 1..],
        None => auth,
    };
    if h.starts_with('[') {
        return match h.find(']') {
            Some(e) => &h[..e + 1],
            None => h,
        };
    }
    match h.find(':') {
        Some(i) => &h[..i],
        None => h,
    }
}

/// Lowercase; drop userinfo and empty or non-numeric ports.
fn canonical_auth(auth: &str) -> String {
    let a = auth.to_lowercase();
    let a = match a.rfind('@') {
        Some(i) => &a[i + 1..],
        None => a.as_str(),
    };
    let (host, port) = if let Some(rest) = a.strip_prefix('[') {
        match rest.find(']') {
            Some(e) => (&a[..e + 2], a[e + 2..].strip_prefix(':')),
            None => (a, None),
        }
    } else {
        match a.find(':') {
            Some(i) => (&a[..i], Some(&a[i + 1..])),
            None => (a, None),
        }
    };
    match port {
        Some(p) if !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit()) => {
            format!("{host}:{p}")
        }
        _ => host.to_string(),
    }
}

fn starts_ci(s: &str, prefix: &str) -> bool {
    s.len() >= prefix.len() && s[..prefix.len()].eq_ignore_ascii_case(prefix)
}

fn rule_for<'r>(host: &str, rules: &'r HashMap<String, PlainRule>) -> Option<&'r PlainRule> {
    let mut h = host;
    loop {
        if let Some(r) = rules.get(h) {
            return Some(r);
        }
        match h.find('.') {
            Some(d) => h = &h[d + 1..],
            None => return None,
        }
    }
}

/// Canonical URL, or None for rejects. Trims and percent-repairs
/// whitespace, strips http(s), unwraps archive services up to three
/// levels, lowercases and reduces the authority, drops trailing slashes
/// and applies the per-domain rule.
pub fn canon_url(raw: &str, rules: &HashMap<String, PlainRule>) -> Option<String> {
    let mut s = String::with_capacity(raw.len());
    for c in raw.trim().chars() {
        match c {
            ' ' => s.push_str("%20"),
            '\t' => s.push_str("%09"),
            c if c.is_control() => {}
            c => s.push(c),
        }
    }
    let mut host = String::new();
    for _ in 0..4 {
        if starts_ci(&s, "https://") {
            s = s[8..].to_string();
        } else if starts_ci(&s, "http://") {
            s = s[7..].to_string();
        } else if let Some(rest) = s.strip_prefix("//") {
            s = rest.to_string();
        } else {
            let mut i = 0;
            for c in s.chars() {
                if c.is_alphanumeric() || matches!(c, '+' | '.' | '-') {
                    i += c.len_utf8();
                } else {
                    break;
                }
            }
            if i > 0
                && i < s.len()
                && s.as_bytes()[i] == b':'
                && s.chars().next().unwrap().is_alphabetic()
            {
                return None; // unsupported scheme
            }
        }
        if s.is_empty() {
            return None;
        }
        let (auth, rest) = split_authority(&s);
        let canon = canonical_auth(auth);
        host = host_of(&canon).to_string();
        let mut inner: Option<String> = None;
        let is_wayback = WAYBACK_HOSTS.contains(&host.as_str()) && rest.starts_with("/web/");
        if is_wayback || TODAY_HOSTS.contains(&host.as_str()) {
            for probe in ["https://", "http://"] {
                if let Some(at) = rest.find(probe) {
                    inner = Some(rest[at..].to_string());
                    break;
                }
            }
        }
        s = format!("{canon}{rest}");
        match inner {
            Some(x) => s = x,
            None => break,
        }
    }
    while s.ends_with('/') {
        s.pop();
    }
    let (auth, rest) = split_authority(&s);
    if let Some(rule) = rule_for(host_of(auth), rules) {
        let auth = auth.to_string();
        let mut rest = rest.to_string();
        if let Some(i) = rest.find('#') {
            rest.truncate(i);
        }
        if let PlainRule::KeepParams(keys) = rule {
            if let Some(q) = rest.find('?') {
                let path = rest[..q].to_string();
                let pairs: Vec<(String, String)> = rest[q + 1..]
                    .split('&')
                    .filter(|p| !p.is_empty())
                    .map(|p| match p.split_once('=') {
                        Some((k, v)) => (k.to_string(), v.to_string()),
                        None => (p.to_string(), String::new()),
                    })
                    .collect();
                let kept: Vec<String> = keys
                    .iter()
                    .filter_map(|want| {
                        pairs
                            .iter()
                            .find(|(k, _)| k == want)
                            .map(|(k, v)| format!("{k}={v}"))
                    })
                    .collect();
                rest = if kept.is_empty() {
                    path
                } else {
                    format!("{path}?{}", kept.join("&"))
                };
            }
        }
        s = format!("{auth}{rest}");
        while s.ends_with('/') {
            s.pop();
        }
    }
    Some(s)
}

// --------------------------------------------------------------------------
// Whole-fixture metric recomputation
// --------------------------------------------------------------------------

/// Where the raw fixture files live and the scalar settings that govern
/// them; everything the oracle consumes comes through here.
pub struct FixtureSpec<'a> {
    pub dir: &'a Path,
    pub page_sql: &'a str,
    pub pagelinks_sql: &'a str,
    pub externallinks_sql: &'a str,
    pub revisions: &'a [&'a str],
    pub pageviews: &'a [&'a str],
    pub citations: &'a str,
    pub rule_file: &'a str,
    pub wiki: &'a str,
    pub views_start: &'a str,
    pub views_end: &'a str,
    pub as_of: &'a str,
    pub schemes: &'a [&'a str],
}

struct PageRow {
    id: u64,
    ns: i32,
    title: String,
    redirect: bool,
    length: u64,
}

/// Age cell: whole days / 365.25, rounded half-up to cents, floored at 0.
/// Integer-cent formatting sidesteps float printing entirely.
fn age_cell(days: i64) -> String {
    if days <= 0 {
        return "0.00".to_string();
    }
    let cents = (days as f64 / 365.25 * 100.0 + 0.5).floor() as i64;
    format!("{}.{:02}", cents / 100, cents % 100)
}

/// Recompute all twelve metrics for every article, straight from the raw
/// dump files. Returns rows shaped like the metrics table: page_id,
/// editors, edits, linked, links, age, length, talkers, talks, views,
/// references, pub_referenced, urls — sorted by page id.
pub fn metrics_by_hand(f: &FixtureSpec) -> Vec<Vec<String>> {
    let pages: Vec<PageRow> = sql_tuples(&read_input(&f.dir.join(f.page_sql)), "page")
        .iter()
        .map(|r| PageRow {
            id: r[0].parse().unwrap(),
            ns: r[1].parse().unwrap(),
            title: r[2].clone(),
            redirect: r[4] == "1",
            length: r[10].parse().unwrap(),
        })
        .collect();

    // Revision history: edits, distinct contributors, first timestamp.
    let mut tally: HashMap<u64, (u64, HashSet<String>, Option<String>)> = HashMap::new();
    for shard in f.revisions {
        for page in xml_pages(&read_input(&f.dir.join(shard))) {
            let e = tally.entry(page.id).or_insert_with(|| (0, HashSet::new(), None));
            for (ts, tag) in page.revisions {
                e.0 += 1;
                e.1.insert(tag);
                // ISO-8601 strings sort chronologically.
                if e.2.as_ref().is_none_or(|c| ts < *c) {
                    e.2 = Some(ts);
                }
            }
        }
    }

    // Daily view files: well-formed rows inside the window, right wiki,
    // user traffic only; page-id cell `""|null|0` falls back to the title.
    let start = date_days(f.views_start);
    let end = date_days(f.views_end);
    let mut views_by_id: HashMap<u64, u64> = HashMap::new();
    let mut views_by_title: HashMap<String, u64> = HashMap::new();
    for name in f.pageviews {
        let day = date_days_from_name(name);
        for line in read_input(&f.dir.join(name)).lines() {
            if line.is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split('\t').collect();
            if cells.len() < 5 {
                continue; // malformed
            }
            let Ok(count) = cells[4].parse::<u64>() else { continue };
            if cells[0] != f.wiki || day < start || day > end || cells[3] != "user" {
                continue;
            }
            match cells[2] {
                "" | "null" | "0" => {
                    *views_by_title.entry(cells[1].to_string()).or_insert(0) += count;
                }
                id => match id.parse::<u64>() {
                    Ok(id) => *views_by_id.entry(id).or_insert(0) += count,
                    Err(_) => continue, // malformed id
                },
            }
        }
    }

    // Talk activity keyed by subject title; /Archive subpages fold in,
    // summing both edits and contributor counts.
    let mut talk: HashMap<String, (u64, u64)> = HashMap::new();
    for p in pages.iter().filter(|p| p.ns == 1) {
        let subject = match p.title.find("/Archive") {
            Some(cut) => &p.title[..cut],
            None => p.title.as_str(),
        };
        let (edits, editors) = tally
            .get(&p.id)
            .map(|(e, u, _)| (*e, u.len() as u64))
            .unwrap_or((0, 0));
        let slot = talk.entry(subject.to_string()).or_insert((0, 0));
        slot.0 += edits;
        slot.1 += editors;
    }

    // Article-to-article links: resolve titles (first page id wins on
    // duplicates), keep known sources, chase one redirect hop, dedup.
    let mut in_scope: HashMap<String, (u64, bool)> = HashMap::new();
    let mut ns0: Vec<&PageRow> = pages.iter().filter(|p| p.ns == 0).collect();
    ns0.sort_by_key(|p| p.id);
    for p in &ns0 {
        in_scope.entry(norm_title(&p.title)).or_insert((p.id, p.redirect));
    }
    let known: HashSet<u64> = pages.iter().map(|p| p.id).collect();
    let mut resolved: Vec<(u64, u64, bool)> = Vec::new();
    for r in sql_tuples(&read_input(&f.dir.join(f.pagelinks_sql)), "pagelinks") {
        let from: u64 = r[0].parse().unwrap();
        let ns: i32 = r[1].parse().unwrap();
        if ns != 0 {
            continue;
        }
        let Some(&(to, to_redirect)) = in_scope.get(&norm_title(&r[2])) else {
            continue;
        };
        if !known.contains(&from) {
            continue;
        }
        resolved.push((from, to, to_redirect));
    }
    let redirect_ids: HashSet<u64> =
        pages.iter().filter(|p| p.redirect).map(|p| p.id).collect();
    let mut ordered = resolved.clone();
    ordered.sort_unstable();
    let mut redirect_map: HashMap<u64, (u64, bool)> = HashMap::new();
    for &(from, to, to_redirect) in &ordered {
        if redirect_ids.contains(&from) {
            redirect_map.entry(from).or_insert((to, to_redirect));
        }
    }
    let mut edges: BTreeSet<(u64, u64)> = BTreeSet::new();
    for &(from, to, to_redirect) in &resolved {
        let to = if to_redirect {
            match redirect_map.get(&to) {
                Some(&(hop, false)) => hop,
                _ => continue, // chase failed
            }
        } else {
            to
        };
        edges.insert((from, to));
    }

    // Distinct canonical URLs per page, from both raw sources.
    let rules = parse_rule_file(&read_input(&f.dir.join(f.rule_file)));
    let mut url_pairs: HashSet<(u64, String)> = HashSet::new();
    for r in sql_tuples(&read_input(&f.dir.join(f.externallinks_sql)), "externallinks") {
        let from: u64 = r[1].parse().unwrap();
        if let Some(c) = canon_url(&r[2], &rules) {
            url_pairs.insert((from, c));
        }
    }

    // Citation records: full-width rows with a positive page id.
    let text = read_input(&f.dir.join(f.citations));
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().expect("citations header").split('\t').collect();
    let col = |name: &str| header.iter().position(|h| *h == name);
    let pid_col = col("page_id").expect("page_id column");
    let url_col = col("URL");
    let id_cols: Vec<(String, usize)> = f
        .schemes
        .iter()
        .filter_map(|s| col(&format!("ID_list.{}", s.to_uppercase())).map(|i| (s.to_string(), i)))
        .collect();
    let mut refs: HashMap<u64, u64> = HashMap::new();
    let mut pub_pairs: HashSet<(u64, String)> = HashSet::new();
    for line in lines {
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != header.len() {
            continue; // malformed
        }
        let Ok(pid) = cells[pid_col].parse::<u64>() else { continue };
        if pid == 0 {
            continue;
        }
        *refs.entry(pid).or_insert(0) += 1;
        if let Some(u) = url_col {
            if !cells[u].is_empty() {
                if let Some(c) = canon_url(cells[u], &rules) {
                    url_pairs.insert((pid, c));
                }
            }
        }
        let pairs: Vec<(String, String)> = id_cols
            .iter()
            .filter(|(_, i)| !cells[*i].trim().is_empty())
            .filter_map(|(s, i)| norm_identifier(s, cells[*i]).map(|v| (s.clone(), v)))
            .collect();
        if let Some(key) = identity_key(&pairs) {
            pub_pairs.insert((pid, key));
        }
    }

    // Assemble, one row per article (main-namespace non-redirect).
    let as_of = date_days(f.as_of);
    let articles: BTreeMap<u64, &PageRow> = pages
        .iter()
        .filter(|p| p.ns == 0 && !p.redirect)
        .map(|p| (p.id, p))
        .collect();
    let mut links: HashMap<u64, u64> = HashMap::new();
    let mut linked: HashMap<u64, u64> = HashMap::new();
    for &(a, b) in &edges {
        if articles.contains_key(&a) && articles.contains_key(&b) {
            *links.entry(a).or_insert(0) += 1;
            *linked.entry(b).or_insert(0) += 1;
        }
    }
    let count_for = |set: &HashSet<(u64, String)>, id: u64| {
        set.iter().filter(|(p, _)| *p == id).count() as u64
    };
    articles
        .values()
        .map(|p| {
            let (edits, editors, created) = tally
                .get(&p.id)
                .map(|(e, u, c)| (*e, u.len() as u64, c.clone()))
                .unwrap_or((0, 0, None));
            let age = match &created {
                Some(ts) => age_cell(as_of - date_days(ts)),
                None => "0.00".to_string(),
            };
            let views =
                views_by_id.get(&p.id).copied().unwrap_or(0)
                    + views_by_title.get(&p.title).copied().unwrap_or(0);
            let (talks, talkers) = talk.get(&p.title).copied().unwrap_or((0, 0));
            vec![
                p.id.to_string(),
                editors.to_string(),
                edits.to_string(),
                linked.get(&p.id).copied().unwrap_or(0).to_string(),
                links.get(&p.id).copied().unwrap_or(0).to_string(),
                age,
                p.length.to_string(),
                talkers.to_string(),
                talks.to_string(),
                views.to_string(),
                refs.get(&p.id).copied().unwrap_or(0).to_string(),
                count_for(&pub_pairs, p.id).to_string(),
                count_for(&url_pairs, p.id).to_string(),
            ]
        })
        .collect()
}
