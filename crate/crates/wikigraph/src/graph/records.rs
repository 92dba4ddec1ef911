//! Row types shared by the graph builders: the `page.tsv` record and
//! the intermediate records that flow through external sorts.

use std::io::{self, BufRead, Read, Write};
use std::path::Path;

use chrono::NaiveDateTime;

use crate::extsort::{
    at_eof, read_i32, read_string, read_u64, read_u8, write_i32, write_string, write_u64,
    write_u8, ExtRecord,
};
use crate::graph::{GraphError, PAGE_FILE, PAGE_HEADER};
use crate::tsv::TsvReader;

/// Timestamp format used in every graph file.
pub const TIME_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

pub fn format_time(t: NaiveDateTime) -> String {
    t.format(TIME_FORMAT).to_string()
}

pub fn parse_time(s: &str) -> Option<NaiveDateTime> {
    NaiveDateTime::parse_from_str(s, TIME_FORMAT).ok()
}

fn parse_bool(field: &str) -> Option<bool> {
    match field {
        "0" => Some(false),
        "1" => Some(true),
        _ => None,
    }
}

/// One row of `page.tsv`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageRecord {
    pub page_id: u64,
    pub namespace: i32,
    pub title: String,
    pub is_redirect: bool,
    pub is_new: bool,
    pub restrictions: String,
    pub touched: Option<NaiveDateTime>,
    pub length: u64,
    /// Timestamp of the earliest revision; absent when the history dump
    /// had no revision for the page.
    pub created: Option<NaiveDateTime>,
    pub edits: u64,
    pub editors: u64,
    pub views: u64,
}

impl PageRecord {
    pub fn to_row(&self) -> Vec<String> {
        vec![
            self.page_id.to_string(),
            self.namespace.to_string(),
            self.title.clone(),
            if self.is_redirect { "1" } else { "0" }.to_string(),
            if self.is_new { "1" } else { "0" }.to_string(),
            self.restrictions.clone(),
            self.touched.map(format_time).unwrap_or_default(),
            self.length.to_string(),
            self.created.map(format_time).unwrap_or_default(),
            self.edits.to_string(),
            self.editors.to_string(),
            self.views.to_string(),
        ]
    }

    pub fn from_row(fields: &[String]) -> Result<PageRecord, GraphError> {
        let bad = |detail: String| GraphError::BadGraphFile {
            file: PAGE_FILE.to_string(),
            detail,
        };
        if fields.len() != PAGE_HEADER.len() {
            return Err(bad(format!(
                "expected {} fields, found {}",
                PAGE_HEADER.len(),
                fields.len()
            )));
        }
        let int = |i: usize, name: &str| -> Result<u64, GraphError> {
            fields[i]
                .parse::<u64>()
                .map_err(|_| bad(format!("bad {name} value `{}`", fields[i])))
        };
        let time = |i: usize, name: &str| -> Result<Option<NaiveDateTime>, GraphError> {
            if fields[i].is_empty() {
                return Ok(None);
            }
            parse_time(&fields[i])
                .map(Some)
                .ok_or_else(|| bad(format!("bad {name} timestamp `{}`", fields[i])))
        };
        Ok(PageRecord {
            page_id: int(0, "page_id")?,
            namespace: fields[1]
                .parse::<i32>()
                .map_err(|_| bad(format!("bad namespace value `{}`", fields[1])))?,
            title: fields[2].clone(),
            is_redirect: parse_bool(&fields[3])
                .ok_or_else(|| bad(format!("bad is_redirect value `{}`", fields[3])))?,
            is_new: parse_bool(&fields[4])
                .ok_or_else(|| bad(format!("bad is_new value `{}`", fields[4])))?,
            restrictions: fields[5].clone(),
            touched: time(6, "touched")?,
            length: int(7, "length")?,
            created: time(8, "created")?,
            edits: int(9, "edits")?,
            editors: int(10, "editors")?,
            views: int(11, "views")?,
        })
    }
}

/// Streaming reader over `page.tsv` in a graph directory.
pub struct PageTableReader {
    reader: TsvReader<Box<dyn BufRead + Send>>,
}

impl PageTableReader {
    pub fn open(dir: &Path) -> Result<Self, GraphError> {
        let path = dir.join(PAGE_FILE);
        let file = std::fs::File::open(&path).map_err(|e| GraphError::BadGraphFile {
            file: path.display().to_string(),
            detail: e.to_string(),
        })?;
        let boxed: Box<dyn BufRead + Send> = Box::new(io::BufReader::new(file));
        let reader = TsvReader::from_reader(boxed, &path.display().to_string())?;
        reader.expect_header(&PAGE_HEADER)?;
        Ok(PageTableReader { reader })
    }

    pub fn next_record(&mut self) -> Result<Option<PageRecord>, GraphError> {
        match self.reader.next_row()? {
            None => Ok(None),
            Some(fields) => Ok(Some(PageRecord::from_row(&fields)?)),
        }
    }
}

/// Membership probe against the id column of `page.tsv`, which is
/// sorted ascending. Queries must also arrive in non-decreasing order;
/// the probe then runs as a single merge pass with O(1) memory.
pub struct PageIdProbe {
    reader: PageTableReader,
    current: Option<u64>,
    last_query: u64,
}

impl PageIdProbe {
    pub fn open(dir: &Path) -> Result<Self, GraphError> {
        let mut reader = PageTableReader::open(dir)?;
        let current = reader.next_record()?.map(|r| r.page_id);
        Ok(PageIdProbe {
            reader,
            current,
            last_query: 0,
        })
    }

    pub fn contains(&mut self, id: u64) -> Result<bool, GraphError> {
        debug_assert!(id >= self.last_query, "probe queries must be sorted");
        self.last_query = id;
        while let Some(cur) = self.current {
            if cur >= id {
                return Ok(cur == id);
            }
            self.current = self.reader.next_record()?.map(|r| r.page_id);
        }
        Ok(false)
    }
}

fn read_bool(r: &mut impl Read) -> io::Result<bool> {
    Ok(read_u8(r)? != 0)
}

fn write_bool(w: &mut impl Write, b: bool) -> io::Result<()> {
    write_u8(w, u8::from(b))
}

/// Page row headed into `page.tsv`, sorted by id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PageSortRec {
    pub id: u64,
    pub namespace: i32,
    pub title: String,
    pub is_redirect: bool,
    pub is_new: bool,
    pub restrictions: String,
    pub touched: String,
    pub length: u64,
}

impl ExtRecord for PageSortRec {
    fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        write_u64(w, self.id)?;
        write_i32(w, self.namespace)?;
        write_string(w, &self.title)?;
        write_bool(w, self.is_redirect)?;
        write_bool(w, self.is_new)?;
        write_string(w, &self.restrictions)?;
        write_string(w, &self.touched)?;
        write_u64(w, self.length)
    }

    fn read_from<R: BufRead>(r: &mut R) -> io::Result<Option<Self>> {
        if at_eof(r)? {
            return Ok(None);
        }
        Ok(Some(PageSortRec {
            id: read_u64(r)?,
            namespace: read_i32(r)?,
            title: read_string(r)?,
            is_redirect: read_bool(r)?,
            is_new: read_bool(r)?,
            restrictions: read_string(r)?,
            touched: read_string(r)?,
            length: read_u64(r)?,
        }))
    }

    fn heap_size(&self) -> usize {
        self.title.capacity() + self.restrictions.capacity() + self.touched.capacity()
    }
}

/// Category row headed into `category.tsv`, sorted by id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CategorySortRec {
    pub id: u64,
    pub title: String,
    pub pages: u64,
    pub subcats: u64,
    pub files: u64,
}

impl ExtRecord for CategorySortRec {
    fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        write_u64(w, self.id)?;
        write_string(w, &self.title)?;
        write_u64(w, self.pages)?;
        write_u64(w, self.subcats)?;
        write_u64(w, self.files)
    }

    fn read_from<R: BufRead>(r: &mut R) -> io::Result<Option<Self>> {
        if at_eof(r)? {
            return Ok(None);
        }
        Ok(Some(CategorySortRec {
            id: read_u64(r)?,
            title: read_string(r)?,
            pages: read_u64(r)?,
            subcats: read_u64(r)?,
            files: read_u64(r)?,
        }))
    }

    fn heap_size(&self) -> usize {
        self.title.capacity()
    }
}

/// (namespace, canonical title) -> page id: the resolution run derived
/// from the page table, sorted so link targets can be merge-joined.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TitleRec {
    pub namespace: i32,
    pub title: String,
    pub id: u64,
    pub is_redirect: bool,
}

impl ExtRecord for TitleRec {
    fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        write_i32(w, self.namespace)?;
        write_string(w, &self.title)?;
        write_u64(w, self.id)?;
        write_bool(w, self.is_redirect)
    }

    fn read_from<R: BufRead>(r: &mut R) -> io::Result<Option<Self>> {
        if at_eof(r)? {
            return Ok(None);
        }
        Ok(Some(TitleRec {
            namespace: read_i32(r)?,
            title: read_string(r)?,
            id: read_u64(r)?,
            is_redirect: read_bool(r)?,
        }))
    }

    fn heap_size(&self) -> usize {
        self.title.capacity()
    }
}

/// A link row whose target is still a title.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct LinkTargetRec {
    pub namespace: i32,
    pub title: String,
    pub from: u64,
}

impl ExtRecord for LinkTargetRec {
    fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        write_i32(w, self.namespace)?;
        write_string(w, &self.title)?;
        write_u64(w, self.from)
    }

    fn read_from<R: BufRead>(r: &mut R) -> io::Result<Option<Self>> {
        if at_eof(r)? {
            return Ok(None);
        }
        Ok(Some(LinkTargetRec {
            namespace: read_i32(r)?,
            title: read_string(r)?,
            from: read_u64(r)?,
        }))
    }

    fn heap_size(&self) -> usize {
        self.title.capacity()
    }
}

/// A resolved link edge; `to_redirect` survives until redirect
/// resolution decides the edge's fate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct LinkEdgeRec {
    pub from: u64,
    pub to: u64,
    pub to_redirect: bool,
}

impl ExtRecord for LinkEdgeRec {
    fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        write_u64(w, self.from)?;
        write_u64(w, self.to)?;
        write_bool(w, self.to_redirect)
    }

    fn read_from<R: BufRead>(r: &mut R) -> io::Result<Option<Self>> {
        if at_eof(r)? {
            return Ok(None);
        }
        Ok(Some(LinkEdgeRec {
            from: read_u64(r)?,
            to: read_u64(r)?,
            to_redirect: read_bool(r)?,
        }))
    }

    fn heap_size(&self) -> usize {
        0
    }
}

/// Category membership edge keyed for the final sort.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct CategoryEdgeRec {
    pub page: u64,
    pub category: u64,
    /// 0 = page, 1 = subcat, 2 = file.
    pub link_type: u8,
}

impl CategoryEdgeRec {
    pub fn type_name(&self) -> &'static str {
        match self.link_type {
            0 => "page",
            1 => "subcat",
            _ => "file",
        }
    }
}

impl ExtRecord for CategoryEdgeRec {
    fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        write_u64(w, self.page)?;
        write_u64(w, self.category)?;
        write_u8(w, self.link_type)
    }

    fn read_from<R: BufRead>(r: &mut R) -> io::Result<Option<Self>> {
        if at_eof(r)? {
            return Ok(None);
        }
        Ok(Some(CategoryEdgeRec {
            page: read_u64(r)?,
            category: read_u64(r)?,
            link_type: read_u8(r)?,
        }))
    }

    fn heap_size(&self) -> usize {
        0
    }
}

/// One page property row.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PropertyRec {
    pub page: u64,
    pub name: String,
    pub value: String,
}

impl ExtRecord for PropertyRec {
    fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        write_u64(w, self.page)?;
        write_string(w, &self.name)?;
        write_string(w, &self.value)
    }

    fn read_from<R: BufRead>(r: &mut R) -> io::Result<Option<Self>> {
        if at_eof(r)? {
            return Ok(None);
        }
        Ok(Some(PropertyRec {
            page: read_u64(r)?,
            name: read_string(r)?,
            value: read_string(r)?,
        }))
    }

    fn heap_size(&self) -> usize {
        self.name.capacity() + self.value.capacity()
    }
}

/// Canonical URL occurrence, sorted by URL so ids can be assigned in
/// lexicographic order in one pass.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct UrlOccurrenceRec {
    pub url: String,
    pub page: u64,
    pub in_reference: bool,
}

impl ExtRecord for UrlOccurrenceRec {
    fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        write_string(w, &self.url)?;
        write_u64(w, self.page)?;
        write_bool(w, self.in_reference)
    }

    fn read_from<R: BufRead>(r: &mut R) -> io::Result<Option<Self>> {
        if at_eof(r)? {
            return Ok(None);
        }
        Ok(Some(UrlOccurrenceRec {
            url: read_string(r)?,
            page: read_u64(r)?,
            in_reference: read_bool(r)?,
        }))
    }

    fn heap_size(&self) -> usize {
        self.url.capacity()
    }
}

/// Publication occurrence keyed by identity key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PubOccurrenceRec {
    pub key: String,
    pub page: u64,
}

impl ExtRecord for PubOccurrenceRec {
    fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        write_string(w, &self.key)?;
        write_u64(w, self.page)
    }

    fn read_from<R: BufRead>(r: &mut R) -> io::Result<Option<Self>> {
        if at_eof(r)? {
            return Ok(None);
        }
        Ok(Some(PubOccurrenceRec {
            key: read_string(r)?,
            page: read_u64(r)?,
        }))
    }

    fn heap_size(&self) -> usize {
        self.key.capacity()
    }
}

/// Edge with the entity id already assigned, sorted into final order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct EntityEdgeRec {
    pub page: u64,
    pub entity: u64,
    pub in_reference: bool,
}

impl ExtRecord for EntityEdgeRec {
    fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        write_u64(w, self.page)?;
        write_u64(w, self.entity)?;
        write_bool(w, self.in_reference)
    }

    fn read_from<R: BufRead>(r: &mut R) -> io::Result<Option<Self>> {
        if at_eof(r)? {
            return Ok(None);
        }
        Ok(Some(EntityEdgeRec {
            page: read_u64(r)?,
            entity: read_u64(r)?,
            in_reference: read_bool(r)?,
        }))
    }

    fn heap_size(&self) -> usize {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn sample_record() -> PageRecord {
        PageRecord {
            page_id: 42,
            namespace: 0,
            title: "Soil".to_string(),
            is_redirect: false,
            is_new: true,
            restrictions: String::new(),
            touched: Some(
                NaiveDate::from_ymd_opt(2021, 4, 30)
                    .unwrap()
                    .and_hms_opt(12, 0, 1)
                    .unwrap(),
            ),
            length: 180_000,
            created: Some(
                NaiveDate::from_ymd_opt(2001, 9, 12)
                    .unwrap()
                    .and_hms_opt(8, 30, 0)
                    .unwrap(),
            ),
            edits: 120,
            editors: 45,
            views: 99_000,
        }
    }

    #[test]
    fn page_record_round_trips_through_row() {
        let rec = sample_record();
        let row = rec.to_row();
        assert_eq!(row[6], "2021-04-30T12:00:01Z");
        assert_eq!(row[8], "2001-09-12T08:30:00Z");
        let back = PageRecord::from_row(&row).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn page_record_empty_timestamps_round_trip() {
        let mut rec = sample_record();
        rec.touched = None;
        rec.created = None;
        let row = rec.to_row();
        assert_eq!(row[6], "");
        assert_eq!(row[8], "");
        assert_eq!(PageRecord::from_row(&row).unwrap(), rec);
    }

    #[test]
    fn page_record_rejects_bad_fields() {
        let mut row = sample_record().to_row();
        row[3] = "2".to_string();
        assert!(PageRecord::from_row(&row).is_err());
        let mut row = sample_record().to_row();
        row[8] = "2001-09-12".to_string();
        assert!(PageRecord::from_row(&row).is_err());
        let short = vec![String::new(); 3];
        assert!(PageRecord::from_row(&short).is_err());
    }

    #[test]
    fn sort_records_round_trip_bytes() {
        let rec = PageSortRec {
            id: 7,
            namespace: 14,
            title: "Category:Chemistry".to_string(),
            is_redirect: true,
            is_new: false,
            restrictions: "edit=sysop".to_string(),
            touched: "2021-04-30T12:00:01Z".to_string(),
            length: 9,
        };
        let mut buf = Vec::new();
        rec.write_to(&mut buf).unwrap();
        let back = PageSortRec::read_from(&mut buf.as_slice()).unwrap().unwrap();
        assert_eq!(back, rec);

        let t = TitleRec {
            namespace: 0,
            title: "Soil".to_string(),
            id: 42,
            is_redirect: false,
        };
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        assert_eq!(TitleRec::read_from(&mut buf.as_slice()).unwrap().unwrap(), t);

        let u = UrlOccurrenceRec {
            url: "example.org/a".to_string(),
            page: 3,
            in_reference: true,
        };
        let mut buf = Vec::new();
        u.write_to(&mut buf).unwrap();
        assert_eq!(
            UrlOccurrenceRec::read_from(&mut buf.as_slice()).unwrap().unwrap(),
            u
        );
        // Clean EOF reads as None.
        let mut empty: &[u8] = &[];
        assert!(LinkEdgeRec::read_from(&mut empty).unwrap().is_none());
    }

    #[test]
    fn title_rec_orders_by_namespace_then_title() {
        let a = TitleRec {
            namespace: 0,
            title: "B".into(),
            id: 2,
            is_redirect: false,
        };
        let b = TitleRec {
            namespace: 0,
            title: "A".into(),
            id: 9,
            is_redirect: false,
        };
        let c = TitleRec {
            namespace: 1,
            title: "A".into(),
            id: 1,
            is_redirect: false,
        };
        let mut v = vec![a.clone(), b.clone(), c.clone()];
        v.sort();
        assert_eq!(v, vec![b, a, c]);
    }
}
