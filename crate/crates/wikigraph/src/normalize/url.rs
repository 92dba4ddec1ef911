//! URL canonicalization.
//!
//! Raw URLs from wikitext and dump tables are noisy: schemes vary, hosts
//! vary in case, archive services wrap the real target, tracking
//! parameters bloat queries, and copy-paste introduces spaces and line
//! breaks. `normalize_url` reduces each URL to a canonical scheme-less
//! form so that equal resources compare equal:
//!
//! 1. trim; delete line breaks and control characters; percent-encode
//!    interior spaces and tabs;
//! 2. strip an `http://` / `https://` / `//` prefix (other schemes like
//!    `mailto:` or `ftp://` are rejected — this table is about web
//!    resources);
//! 3. lowercase the authority (host, port, userinfo) — only the
//!    authority, paths stay case-sensitive;
//! 4. unwrap web-archive URLs (Wayback `web.archive.org/web/<ts>/<url>`
//!    and the archive.today family), then restart from step 2 on the
//!    embedded URL, at most three times — deeper nesting is rejected so
//!    that normalization stays idempotent;
//! 5. strip all trailing slashes;
//! 6. apply the longest-suffix-matching per-domain rewrite rule, if any,
//!    and strip trailing slashes the rule may have exposed.
//!
//! The derived `domain` is the full lowercased host: no port, no
//! userinfo, and no `www.` stripping (`www.example.org` and `example.org`
//! often serve different content).
//!
//! Domain rules are idempotent rewrites keyed by domain suffix:
//!
//! - `identity` — keep the URL as-is (documents a reviewed domain);
//! - `strip_fragment` — drop the `#fragment`;
//! - `keep_params <p1,p2,…>` — keep only the listed query parameters (in
//!   the listed order) and drop the fragment; e.g. Google Books URLs
//!   reduce to their `id`;
//! - `template </path?x={x}>` — rebuild the URL from query parameters; if
//!   a referenced parameter is missing the URL is left unchanged.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalUrl {
    /// Scheme-less canonical form, e.g. `books.google.com/books?id=x`.
    pub url: String,
    /// Full host: lowercase, no port, no userinfo, `www.` kept.
    pub domain: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UrlErrorReason {
    EmptyInput,
    UnsupportedScheme(String),
    EmptyHost,
    BadHost(String),
    ArchiveNesting,
}

impl fmt::Display for UrlErrorReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UrlErrorReason::EmptyInput => write!(f, "empty after cleaning"),
            UrlErrorReason::UnsupportedScheme(s) => write!(f, "unsupported scheme `{s}`"),
            UrlErrorReason::EmptyHost => write!(f, "empty host"),
            UrlErrorReason::BadHost(h) => write!(f, "invalid host `{h}`"),
            UrlErrorReason::ArchiveNesting => write!(f, "archive nesting deeper than 3"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unparseable URL `{original}`: {reason}")]
pub struct UrlError {
    pub original: String,
    pub reason: UrlErrorReason,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DomainRule {
    Identity,
    StripFragment,
    KeepParams(Vec<String>),
    Template(String),
}

/// Rule set: per-domain rewrites plus the archive hosts recognized during
/// unwrapping. `Default` knows the standard archive services and no
/// domain rules.
#[derive(Debug, Clone)]
pub struct UrlRules {
    rules: HashMap<String, DomainRule>,
    wayback_hosts: HashSet<String>,
    today_hosts: HashSet<String>,
}

impl Default for UrlRules {
    fn default() -> Self {
        let wayback = ["web.archive.org", "archive.org"];
        let today = [
            "archive.today",
            "archive.ph",
            "archive.is",
            "archive.li",
            "archive.md",
            "archive.vn",
            "archive.fo",
        ];
        UrlRules {
            rules: HashMap::new(),
            wayback_hosts: wayback.iter().map(|s| s.to_string()).collect(),
            today_hosts: today.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Error)]
pub enum RuleFileError {
    #[error("rule file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("rule file {path}:{line}: {detail}")]
    Parse {
        path: String,
        line: usize,
        detail: String,
    },
}

impl UrlRules {
    pub fn insert(&mut self, domain: &str, rule: DomainRule) {
        self.rules.insert(domain.to_ascii_lowercase(), rule);
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Load rules from the plain-text format, adding to the defaults:
    ///
    /// ```text
    /// # comment
    /// books.google.com   keep_params id
    /// example.org        identity
    /// doc.example.net    strip_fragment
    /// shop.example       template /item?sku={sku}
    /// mirror.archive.example archive_wayback
    /// ```
    pub fn load(path: &Path) -> Result<Self, RuleFileError> {
        let text = std::fs::read_to_string(path).map_err(|e| RuleFileError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, path: &str) -> Result<Self, RuleFileError> {
        let mut rules = UrlRules::default();
        for (i, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |detail: String| RuleFileError::Parse {
                path: path.to_string(),
                line: i + 1,
                detail,
            };
            let mut parts = line.splitn(3, char::is_whitespace);
            let domain = parts.next().unwrap().to_ascii_lowercase();
            let kind = parts
                .next()
                .ok_or_else(|| err("missing rule kind".into()))?;
            let args = parts.next().map(str::trim).unwrap_or("");
            match kind {
                "identity" => rules.insert(&domain, DomainRule::Identity),
                "strip_fragment" => rules.insert(&domain, DomainRule::StripFragment),
                "keep_params" => {
                    let params: Vec<String> = args
                        .split(',')
                        .map(str::trim)
                        .filter(|p| !p.is_empty())
                        .map(String::from)
                        .collect();
                    if params.is_empty() {
                        return Err(err("keep_params needs at least one parameter".into()));
                    }
                    rules.insert(&domain, DomainRule::KeepParams(params));
                }
                "template" => {
                    if args.is_empty() {
                        return Err(err("template needs a pattern".into()));
                    }
                    rules.insert(&domain, DomainRule::Template(args.to_string()));
                }
                "archive_wayback" => {
                    rules.wayback_hosts.insert(domain);
                }
                "archive_today" => {
                    rules.today_hosts.insert(domain);
                }
                other => return Err(err(format!("unknown rule kind `{other}`"))),
            }
        }
        Ok(rules)
    }

    /// Longest-suffix match on dot boundaries: `a.b.c` tries `a.b.c`,
    /// then `b.c`, then `c`.
    fn rule_for(&self, host: &str) -> Option<&DomainRule> {
        let mut suffix = host;
        loop {
            if let Some(rule) = self.rules.get(suffix) {
                return Some(rule);
            }
            match suffix.find('.') {
                Some(dot) => suffix = &suffix[dot + 1..],
                None => return None,
            }
        }
    }
}

/// Extract the host from a canonical (scheme-less) URL: the authority up
/// to the first `/`, `?` or `#`, minus userinfo and port.
pub fn domain_of(url: &str) -> &str {
    let authority = &url[..url.find(['/', '?', '#']).unwrap_or(url.len())];
    let host_port = match authority.rfind('@') {
        Some(at) => &authority[at + 1..],
        None => authority,
    };
    if let Some(rest) = host_port.strip_prefix('[') {
        // Bracketed IPv6 literal; keep the brackets.
        match rest.find(']') {
            Some(end) => return &host_port[..end + 2],
            None => return host_port,
        }
    }
    match host_port.find(':') {
        Some(colon) => &host_port[..colon],
        None => host_port,
    }
}

pub fn normalize_url(raw: &str, rules: &UrlRules) -> Result<CanonicalUrl, UrlError> {
    let fail = |reason: UrlErrorReason| UrlError {
        original: raw.to_string(),
        reason,
    };

    let mut url = clean(raw);
    if url.is_empty() {
        return Err(fail(UrlErrorReason::EmptyInput));
    }

    // Scheme strip + authority lowercase + archive unwrap, repeated while
    // an archive wrapper remains (bounded depth).
    let mut host;
    let mut depth = 0;
    loop {
        url = strip_scheme(&url).map_err(|r| fail(r))?;
        url = canonical_authority(&url);
        host = domain_of(&url).to_string();
        validate_host(&host).map_err(|r| fail(r))?;
        match unarchive_step(&url, &host, rules) {
            Some(inner) => {
                if depth >= 3 {
                    return Err(fail(UrlErrorReason::ArchiveNesting));
                }
                url = inner;
                depth += 1;
            }
            None => break,
        }
    }

    strip_trailing_slashes(&mut url);
    if let Some(rule) = rules.rule_for(&host) {
        url = apply_rule(&url, rule);
        strip_trailing_slashes(&mut url);
    }
    Ok(CanonicalUrl { url, domain: host })
}

/// Trim, delete line breaks and control characters, percent-encode
/// interior spaces and tabs.
fn clean(raw: &str) -> String {
    let trimmed = raw.trim();
    let mut out = String::with_capacity(trimmed.len());
    for c in trimmed.chars() {
        match c {
            ' ' => out.push_str("%20"),
            '\t' => out.push_str("%09"),
            c if c.is_control() => {} // line breaks and stray control bytes
            c => out.push(c),
        }
    }
    out
}

/// Remove a leading `http://`, `https://` or `//`. A different scheme is
/// an error; `host:port/…` and scheme-less input pass through.
fn strip_scheme(url: &str) -> Result<String, UrlErrorReason> {
    for prefix in ["http://", "https://"] {
        if let Some(head) = url.get(..prefix.len()) {
            if head.eq_ignore_ascii_case(prefix) {
                return Ok(url[prefix.len()..].to_string());
            }
        }
    }
    if let Some(rest) = url.strip_prefix("//") {
        return Ok(rest.to_string());
    }
    // Detect a foreign scheme: `name:` before any `/`, where `name` looks
    // like a scheme (no dots) and what follows is not a port number.
    if let Some(colon) = url.find(':') {
        let before = &url[..colon];
        let after = &url[colon + 1..];
        let scheme_like = !before.is_empty()
            && before.chars().next().unwrap().is_ascii_alphabetic()
            && before
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '+' || c == '-')
            && !after.starts_with(|c: char| c.is_ascii_digit());
        let before_slash = url.find('/').map_or(true, |s| colon < s);
        if scheme_like && before_slash {
            return Err(UrlErrorReason::UnsupportedScheme(before.to_ascii_lowercase()));
        }
    }
    Ok(url.to_string())
}

/// Lower-case the authority and reduce it to `host` or `host:port`.
/// Userinfo is dropped — credentials are not part of resource identity —
/// and so is an empty or non-numeric port. Keeping either would leave a
/// canonical form that cannot be re-read as a scheme-less URL (the
/// `user:` part would scan as a foreign scheme).
fn canonical_authority(url: &str) -> String {
    let end = url.find(['/', '?', '#']).unwrap_or(url.len());
    let authority = url[..end].to_lowercase();
    let host_port = match authority.rfind('@') {
        Some(at) => &authority[at + 1..],
        None => authority.as_str(),
    };
    let (host, port) = match host_port.strip_prefix('[') {
        // Bracketed IPv6 literal: the port colon follows the bracket.
        Some(rest) => match rest.find(']') {
            Some(close) => (
                &host_port[..close + 2],
                host_port[close + 2..].strip_prefix(':'),
            ),
            None => (host_port, None),
        },
        None => match host_port.find(':') {
            Some(colon) => (&host_port[..colon], Some(&host_port[colon + 1..])),
            None => (host_port, None),
        },
    };
    let mut out = String::with_capacity(url.len());
    out.push_str(host);
    if let Some(port) = port {
        if !port.is_empty() && port.bytes().all(|b| b.is_ascii_digit()) {
            out.push(':');
            out.push_str(port);
        }
    }
    out.push_str(&url[end..]);
    out
}

fn validate_host(host: &str) -> Result<(), UrlErrorReason> {
    if host.is_empty() {
        return Err(UrlErrorReason::EmptyHost);
    }
    if host.starts_with('[') && host.ends_with(']') {
        return Ok(()); // IPv6 literal
    }
    let ok_chars = host
        .chars()
        .all(|c| c.is_alphanumeric() || c == '-' || c == '.' || c == '_' || c == '~');
    if !ok_chars || !host.chars().any(|c| c.is_alphanumeric()) {
        return Err(UrlErrorReason::BadHost(host.to_string()));
    }
    Ok(())
}

fn strip_trailing_slashes(url: &mut String) {
    while url.ends_with('/') {
        url.pop();
    }
}

/// If `url` is an archive wrapper, return the embedded original
/// (which may still carry a scheme).
fn unarchive_step(url: &str, host: &str, rules: &UrlRules) -> Option<String> {
    let path = &url[url.find(['/', '?', '#']).unwrap_or(url.len())..];
    if rules.wayback_hosts.contains(host) {
        // web.archive.org/web/<timestamp>/<original>; the timestamp
        // segment may be absent in redirect-style links.
        let rest = path.strip_prefix("/web/")?;
        let inner = if starts_with_http(rest) {
            rest
        } else {
            let slash = rest.find('/')?;
            &rest[slash + 1..]
        };
        return (!inner.is_empty()).then(|| inner.to_string());
    }
    if rules.today_hosts.contains(host) {
        // archive.today/<code or date>/<original>; scan for the embedded
        // scheme since the prefix segments vary.
        for marker in ["/http://", "/https://"] {
            if let Some(i) = find_ascii_ci(path, marker) {
                return Some(path[i + 1..].to_string());
            }
        }
    }
    None
}

fn starts_with_http(s: &str) -> bool {
    s.get(..4).is_some_and(|head| head.eq_ignore_ascii_case("http"))
}

/// Case-insensitive ASCII substring search.
fn find_ascii_ci(haystack: &str, needle: &str) -> Option<usize> {
    let h = haystack.as_bytes();
    let n = needle.as_bytes();
    if n.is_empty() || h.len() < n.len() {
        return None;
    }
    (0..=h.len() - n.len()).find(|&i| h[i..i + n.len()].eq_ignore_ascii_case(n))
}

fn apply_rule(url: &str, rule: &DomainRule) -> String {
    match rule {
        DomainRule::Identity => url.to_string(),
        DomainRule::StripFragment => match url.find('#') {
            Some(i) => url[..i].to_string(),
            None => url.to_string(),
        },
        DomainRule::KeepParams(keep) => {
            let (base, query, _fragment) = split_parts(url);
            let params = parse_query(query);
            let kept: Vec<&str> = keep
                .iter()
                .filter_map(|k| params.get(k.as_str()).copied())
                .collect();
            if kept.is_empty() {
                base.to_string()
            } else {
                format!("{base}?{}", kept.join("&"))
            }
        }
        DomainRule::Template(tpl) => {
            let (base, query, _fragment) = split_parts(url);
            let host = domain_of(base);
            let params = parse_query(query);
            match fill_template(tpl, &params) {
                Some(filled) => format!("{host}{filled}"),
                None => url.to_string(), // a referenced param is missing
            }
        }
    }
}

/// `(before query, query, fragment)` — query excludes `?`, fragment
/// excludes `#`.
fn split_parts(url: &str) -> (&str, &str, &str) {
    let (rest, fragment) = match url.find('#') {
        Some(i) => (&url[..i], &url[i + 1..]),
        None => (url, ""),
    };
    match rest.find('?') {
        Some(i) => (&rest[..i], &rest[i + 1..], fragment),
        None => (rest, "", fragment),
    }
}

/// Raw `key=value` pairs of a query string, first occurrence wins. The
/// full `key=value` text is kept so values round-trip byte-exactly.
fn parse_query(query: &str) -> BTreeMap<&str, &str> {
    let mut map = BTreeMap::new();
    for pair in query.split('&') {
        if pair.is_empty() {
            continue;
        }
        let key = &pair[..pair.find('=').unwrap_or(pair.len())];
        map.entry(key).or_insert(pair);
    }
    map
}

/// Substitute `{name}` placeholders with the *value* part of the matching
/// query parameter. Returns None if any referenced parameter is absent.
fn fill_template(tpl: &str, params: &BTreeMap<&str, &str>) -> Option<String> {
    let mut out = String::with_capacity(tpl.len());
    let mut rest = tpl;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let close = rest[open..].find('}')? + open;
        let name = &rest[open + 1..close];
        let pair = params.get(name)?;
        let value = &pair[pair.find('=').map(|i| i + 1).unwrap_or(pair.len())..];
        if value.is_empty() {
            return None;
        }
        out.push_str(value);
        rest = &rest[close + 1..];
    }
    out.push_str(rest);
    Some(out)
}
