//! Streaming `.xlsx` reader.

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use quick_xml::events::{BytesRef, BytesStart, Event};
use quick_xml::name::QName;
use quick_xml::Reader;
use rayon::prelude::*;
use zip::ZipArchive;

use super::XlsxError;
use crate::addr::{parse_bare_cell, CellAddress};
use crate::workbook::{CellValue, ImageAsset, Sheet, Workbook};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct IngestOptions {
    /// Cap on total materialized cells across the workbook.
    pub max_cells: u64,
    pub include_images: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            max_cells: 8_000_000,
            include_images: true,
        }
    }
}

/// Parsed workbook plus non-fatal findings (unsupported media, non-raster
/// drawing content, and similar).
#[derive(Debug)]
pub struct IngestResult {
    pub workbook: Workbook,
    pub warnings: Vec<String>,
}

fn attr_local(key: QName<'_>) -> &[u8] {
    key.local_name().into_inner()
}

fn get_attr(e: &BytesStart<'_>, local: &[u8], member: &str) -> Result<Option<String>, XlsxError> {
    for attr in e.attributes() {
        let attr = attr.map_err(|err| XlsxError::xml(member, err))?;
        if attr_local(attr.key) == local {
            return Ok(Some(
                attr.unescape_value()
                    .map_err(|err| XlsxError::xml(member, err))?
                    .into_owned(),
            ));
        }
    }
    Ok(None)
}

/// Resolve `&amp;`-style and numeric character references, which the
/// parser reports as separate events rather than inline text.
fn resolve_general_ref(r: &BytesRef<'_>, member: &str) -> Result<String, XlsxError> {
    if let Some(ch) = r
        .resolve_char_ref()
        .map_err(|e| XlsxError::xml(member, e))?
    {
        return Ok(ch.to_string());
    }
    let name = r.decode().map_err(|e| XlsxError::xml(member, e))?;
    match quick_xml::escape::resolve_predefined_entity(&name) {
        Some(s) => Ok(s.to_string()),
        None => Err(XlsxError::xml(
            member,
            format!("unknown entity reference &{name};"),
        )),
    }
}

fn open_archive(path: &Path) -> Result<ZipArchive<File>, XlsxError> {
    let file = File::open(path).map_err(|e| XlsxError::io(path.display().to_string(), e))?;
    ZipArchive::new(file).map_err(|_| XlsxError::NotZip {
        path: path.display().to_string(),
    })
}

fn read_member(archive: &mut ZipArchive<File>, member: &str) -> Result<Vec<u8>, XlsxError> {
    let mut entry = archive.by_name(member).map_err(|_| XlsxError::MissingPart {
        member: member.to_string(),
    })?;
    let mut buf = Vec::with_capacity(entry.size() as usize);
    entry
        .read_to_end(&mut buf)
        .map_err(|e| XlsxError::io(member, e))?;
    Ok(buf)
}

fn has_member(archive: &mut ZipArchive<File>, member: &str) -> bool {
    archive.by_name(member).is_ok()
}

/// Resolve a relationship target against the directory of the part holding
/// the relationship (e.g. `worksheets/sheet1.xml` against `xl/`).
fn resolve_target(base_dir: &str, target: &str) -> String {
    if let Some(abs) = target.strip_prefix('/') {
        return abs.to_string();
    }
    let mut parts: Vec<&str> = base_dir.split('/').filter(|p| !p.is_empty()).collect();
    for seg in target.split('/') {
        match seg {
            "." | "" => {}
            ".." => {
                parts.pop();
            }
            s => parts.push(s),
        }
    }
    parts.join("/")
}

fn rels_path_for(part: &str) -> String {
    match part.rfind('/') {
        Some(i) => format!("{}/_rels/{}.rels", &part[..i], &part[i + 1..]),
        None => format!("_rels/{part}.rels"),
    }
}

fn parse_relationships(xml: &[u8], member: &str) -> Result<HashMap<String, String>, XlsxError> {
    let mut reader = Reader::from_reader(xml);
    reader.config_mut().trim_text(true);
    let mut map = HashMap::new();
    let mut buf = Vec::new();
    loop {
        match reader.read_event_into(&mut buf) {
            Ok(Event::Start(e)) | Ok(Event::Empty(e)) => {
                if attr_local(e.name()) == b"Relationship" {
                    let id = get_attr(&e, b"Id", member)?;
                    let target = get_attr(&e, b"Target", member)?;
                    if let (Some(id), Some(target)) = (id, target) {
                        map.insert(id, target);
                    }
                }
            }
            Ok(Event::Eof) => break,
            Err(e) => return Err(XlsxError::xml(member, e)),
            _ => {}
        }
        buf.clear();
    }
    Ok(map)
}

/// Sheet entries from `xl/workbook.xml` in workbook order: (name, r:id).
fn parse_workbook_sheets(xml: &[u8]) -> Result<Vec<(String, String)>, XlsxError> {
    const MEMBER: &str = "xl/workbook.xml";
    let mut reader = Reader::from_reader(xml);
    reader.config_mut().trim_text(true);
    let mut sheets = Vec::new();
    let mut buf = Vec::new();
    loop {
        match reader.read_event_into(&mut buf) {
            Ok(Event::Start(e)) | Ok(Event::Empty(e)) => {
                if attr_local(e.name()) == b"sheet" {
                    let name = get_attr(&e, b"name", MEMBER)?
                        .ok_or_else(|| XlsxError::xml(MEMBER, "sheet element without name"))?;
                    let rid = get_attr(&e, b"id", MEMBER)?
                        .ok_or_else(|| XlsxError::xml(MEMBER, "sheet element without r:id"))?;
                    sheets.push((name, rid));
                }
            }
            Ok(Event::Eof) => break,
            Err(e) => return Err(XlsxError::xml(MEMBER, e)),
            _ => {}
        }
        buf.clear();
    }
    if sheets.is_empty() {
        return Err(XlsxError::xml(MEMBER, "workbook declares no sheets"));
    }
    Ok(sheets)
}

fn parse_shared_strings(xml: &[u8]) -> Result<Vec<String>, XlsxError> {
    const MEMBER: &str = "xl/sharedStrings.xml";
    let mut reader = Reader::from_reader(xml);
    let mut strings = Vec::new();
    let mut buf = Vec::new();
    let mut current = String::new();
    let mut in_si = false;
    let mut in_t = false;
    loop {
        match reader.read_event_into(&mut buf) {
            Ok(Event::Start(e)) => match attr_local(e.name()) {
                b"si" => {
                    in_si = true;
                    current.clear();
                }
                b"t" if in_si => in_t = true,
                _ => {}
            },
            Ok(Event::Text(t)) if in_t => {
                current.push_str(&t.decode().map_err(|e| XlsxError::xml(MEMBER, e))?);
            }
            Ok(Event::GeneralRef(r)) if in_t => {
                current.push_str(&resolve_general_ref(&r, MEMBER)?);
            }
            Ok(Event::End(e)) => match attr_local(e.name()) {
                b"t" => in_t = false,
                b"si" => {
                    in_si = false;
                    strings.push(std::mem::take(&mut current));
                }
                _ => {}
            },
            Ok(Event::Empty(e)) if attr_local(e.name()) == b"t" && in_si => {
                // <t/> contributes nothing but keeps the run count aligned.
            }
            Ok(Event::Eof) => break,
            Err(e) => return Err(XlsxError::xml(MEMBER, e)),
            _ => {}
        }
        buf.clear();
    }
    Ok(strings)
}

fn iso_to_date_value(text: &str) -> CellValue {
    let epoch = chrono::NaiveDate::from_ymd_opt(1899, 12, 30).expect("valid epoch");
    let serial = chrono::NaiveDateTime::parse_from_str(text, "%Y-%m-%dT%H:%M:%S")
        .map(|dt| {
            let days = (dt.date() - epoch).num_days() as f64;
            let secs = dt.time().signed_duration_since(chrono::NaiveTime::MIN);
            days + secs.num_seconds() as f64 / 86_400.0
        })
        .or_else(|_| {
            chrono::NaiveDate::parse_from_str(text, "%Y-%m-%d")
                .map(|d| (d - epoch).num_days() as f64)
        });
    match serial {
        Ok(serial) => CellValue::Date {
            serial,
            display: Some(text.to_string()),
        },
        // Lenient: keep unparseable date text verbatim.
        Err(_) => CellValue::Text(text.to_string()),
    }
}

struct ParsedSheet {
    sheet: Sheet,
    drawing_rids: Vec<String>,
}

/// Streaming worksheet parser. Only non-empty cells are materialized; the
/// shared `budget` counter enforces `max_cells` across concurrently parsed
/// sheets.
fn parse_worksheet(
    xml: &[u8],
    member: &str,
    name: &str,
    shared: &[String],
    budget: &AtomicU64,
    max_cells: u64,
) -> Result<ParsedSheet, XlsxError> {
    let mut reader = Reader::from_reader(xml);
    let mut sheet = Sheet::new(name);
    let mut drawing_rids = Vec::new();
    let mut buf = Vec::new();

    let mut cur_row: u32 = 0;
    let mut next_col: u32 = 1;
    let mut cell_ref: Option<(u32, u32)> = None;
    let mut cell_type = b'n';
    let mut v_text: Option<String> = None;
    let mut f_text: Option<String> = None;
    let mut in_v = false;
    let mut in_f = false;
    let mut in_is_t = false;
    let mut is_text = String::new();
    let mut in_cell = false;

    macro_rules! text_of {
        ($t:expr) => {
            $t.decode().map_err(|e| XlsxError::xml(member, e))?
        };
    }

    loop {
        match reader.read_event_into(&mut buf) {
            Ok(Event::Start(e)) => match attr_local(e.name()) {
                b"row" => {
                    cur_row = match get_attr(&e, b"r", member)? {
                        Some(r) => r
                            .parse::<u32>()
                            .map_err(|_| XlsxError::xml(member, format!("bad row number {r:?}")))?,
                        None => cur_row + 1,
                    };
                    next_col = 1;
                }
                b"c" => {
                    in_cell = true;
                    v_text = None;
                    f_text = None;
                    is_text.clear();
                    cell_type = b'n';
                    if let Some(t) = get_attr(&e, b"t", member)? {
                        cell_type = match t.as_str() {
                            "s" => b's',
                            "str" => b'r',
                            "inlineStr" => b'i',
                            "b" => b'b',
                            "d" => b'd',
                            "e" => b'e',
                            _ => b'n',
                        };
                    }
                    cell_ref = match get_attr(&e, b"r", member)? {
                        Some(r) => {
                            let (col, row) =
                                parse_bare_cell(&r).map_err(|source| XlsxError::Addr {
                                    member: member.to_string(),
                                    source,
                                })?;
                            next_col = col + 1;
                            Some((col, row))
                        }
                        None => {
                            let col = next_col;
                            next_col += 1;
                            Some((col, cur_row.max(1)))
                        }
                    };
                }
                b"v" => in_v = true,
                b"f" => in_f = true,
                b"t" if in_cell => in_is_t = true,
                b"drawing" => {
                    if let Some(rid) = get_attr(&e, b"id", member)? {
                        drawing_rids.push(rid);
                    }
                }
                _ => {}
            },
            Ok(Event::Empty(e)) => match attr_local(e.name()) {
                b"row" => {
                    cur_row = match get_attr(&e, b"r", member)? {
                        Some(r) => r
                            .parse::<u32>()
                            .map_err(|_| XlsxError::xml(member, format!("bad row number {r:?}")))?,
                        None => cur_row + 1,
                    };
                    next_col = 1;
                }
                b"c" => {
                    // A self-closing cell carries no value or formula.
                    if let Some(r) = get_attr(&e, b"r", member)? {
                        let (col, _) = parse_bare_cell(&r).map_err(|source| XlsxError::Addr {
                            member: member.to_string(),
                            source,
                        })?;
                        next_col = col + 1;
                    } else {
                        next_col += 1;
                    }
                }
                b"drawing" => {
                    if let Some(rid) = get_attr(&e, b"id", member)? {
                        drawing_rids.push(rid);
                    }
                }
                _ => {}
            },
            Ok(Event::Text(t)) => {
                if in_v {
                    let s = text_of!(t);
                    match &mut v_text {
                        Some(acc) => acc.push_str(&s),
                        None => v_text = Some(s.into_owned()),
                    }
                } else if in_f {
                    let s = text_of!(t);
                    match &mut f_text {
                        Some(acc) => acc.push_str(&s),
                        None => f_text = Some(s.into_owned()),
                    }
                } else if in_is_t {
                    is_text.push_str(&text_of!(t));
                }
            }
            Ok(Event::GeneralRef(r)) => {
                let s = resolve_general_ref(&r, member)?;
                if in_v {
                    match &mut v_text {
                        Some(acc) => acc.push_str(&s),
                        None => v_text = Some(s),
                    }
                } else if in_f {
                    match &mut f_text {
                        Some(acc) => acc.push_str(&s),
                        None => f_text = Some(s),
                    }
                } else if in_is_t {
                    is_text.push_str(&s);
                }
            }
            Ok(Event::End(e)) => match attr_local(e.name()) {
                b"v" => in_v = false,
                b"f" => in_f = false,
                b"t" => in_is_t = false,
                b"c" => {
                    in_cell = false;
                    let (col, row) = cell_ref.take().unwrap_or((next_col, cur_row.max(1)));
                    let value = match cell_type {
                        b's' => {
                            let idx: usize = v_text
                                .as_deref()
                                .unwrap_or("")
                                .trim()
                                .parse()
                                .map_err(|_| {
                                    XlsxError::xml(member, "shared string cell without index")
                                })?;
                            let s = shared.get(idx).ok_or_else(|| {
                                XlsxError::xml(member, format!("shared string index {idx} out of range"))
                            })?;
                            CellValue::Text(s.clone())
                        }
                        b'r' => v_text.take().map(CellValue::Text).unwrap_or(CellValue::Empty),
                        b'i' => {
                            if is_text.is_empty() {
                                CellValue::Empty
                            } else {
                                CellValue::Text(std::mem::take(&mut is_text))
                            }
                        }
                        b'b' => CellValue::Bool(v_text.as_deref().map(str::trim) != Some("0")),
                        b'd' => match v_text.take() {
                            Some(v) => iso_to_date_value(v.trim()),
                            None => CellValue::Empty,
                        },
                        b'e' => v_text.take().map(CellValue::Text).unwrap_or(CellValue::Empty),
                        _ => match v_text.take() {
                            Some(v) => match v.trim().parse::<f64>() {
                                Ok(n) => CellValue::Number(n),
                                Err(_) => CellValue::Text(v),
                            },
                            None => CellValue::Empty,
                        },
                    };
                    let formula = f_text.take().filter(|f| !f.is_empty());
                    if !(value.is_empty() && formula.is_none()) {
                        let used = budget.fetch_add(1, Ordering::Relaxed) + 1;
                        if used > max_cells {
                            return Err(XlsxError::TooManyCells {
                                limit: max_cells,
                                member: member.to_string(),
                            });
                        }
                        sheet.set(col, row, value, formula);
                    }
                }
                _ => {}
            },
            Ok(Event::Eof) => break,
            Err(e) => return Err(XlsxError::xml(member, e)),
            _ => {}
        }
        buf.clear();
    }

    Ok(ParsedSheet {
        sheet,
        drawing_rids,
    })
}

struct DrawingPic {
    name: Option<String>,
    descr: Option<String>,
    embed_rid: Option<String>,
    anchor: Option<(u32, u32)>, // 1-based (col, row)
}

struct DrawingContent {
    pics: Vec<DrawingPic>,
    has_non_raster: bool,
}

fn parse_drawing(xml: &[u8], member: &str) -> Result<DrawingContent, XlsxError> {
    let mut reader = Reader::from_reader(xml);
    reader.config_mut().trim_text(true);
    let mut buf = Vec::new();
    let mut content = DrawingContent {
        pics: Vec::new(),
        has_non_raster: false,
    };
    let mut in_from = false;
    let mut from_col: Option<u32> = None;
    let mut from_row: Option<u32> = None;
    let mut capture: Option<&'static str> = None;
    let mut cur_pic: Option<DrawingPic> = None;

    loop {
        match reader.read_event_into(&mut buf) {
            Ok(Event::Start(e)) | Ok(Event::Empty(e)) => match attr_local(e.name()) {
                b"oneCellAnchor" | b"twoCellAnchor" | b"absoluteAnchor" => {
                    from_col = None;
                    from_row = None;
                }
                b"from" => in_from = true,
                b"col" if in_from => capture = Some("col"),
                b"row" if in_from => capture = Some("row"),
                b"pic" => {
                    cur_pic = Some(DrawingPic {
                        name: None,
                        descr: None,
                        embed_rid: None,
                        anchor: match (from_col, from_row) {
                            (Some(c), Some(r)) => Some((c + 1, r + 1)),
                            _ => None,
                        },
                    });
                }
                b"cNvPr" => {
                    if let Some(pic) = &mut cur_pic {
                        pic.name = get_attr(&e, b"name", member)?.filter(|s| !s.is_empty());
                        pic.descr = get_attr(&e, b"descr", member)?.filter(|s| !s.is_empty());
                    }
                }
                b"blip" => {
                    if let Some(pic) = &mut cur_pic {
                        pic.embed_rid = get_attr(&e, b"embed", member)?;
                    }
                }
                // DrawingML charts and shapes are not raster media.
                b"graphicFrame" | b"sp" | b"grpSp" => content.has_non_raster = true,
                _ => {}
            },
            Ok(Event::Text(t)) => {
                if let Some(which) = capture {
                    let v = t
                        .decode()
                        .map_err(|e| XlsxError::xml(member, e))?
                        .trim()
                        .parse::<u32>()
                        .map_err(|_| XlsxError::xml(member, "non-numeric anchor offset"))?;
                    if which == "col" {
                        from_col = Some(v);
                    } else {
                        from_row = Some(v);
                    }
                    capture = None;
                }
            }
            Ok(Event::End(e)) => match attr_local(e.name()) {
                b"from" => in_from = false,
                b"pic" => {
                    if let Some(pic) = cur_pic.take() {
                        content.pics.push(pic);
                    }
                }
                _ => {}
            },
            Ok(Event::Eof) => break,
            Err(e) => return Err(XlsxError::xml(member, e)),
            _ => {}
        }
        buf.clear();
    }
    Ok(content)
}

fn media_type_for(path: &str) -> Option<&'static str> {
    let ext = path.rsplit('.').next()?.to_ascii_lowercase();
    match ext.as_str() {
        "png" => Some("image/png"),
        "jpg" | "jpeg" => Some("image/jpeg"),
        _ => None,
    }
}

fn file_stem(path: &str) -> &str {
    let name = path.rsplit('/').next().unwrap_or(path);
    name.rsplit_once('.').map(|(s, _)| s).unwrap_or(name)
}

/// Read the workbook at `path` into the in-memory model.
pub fn ingest_workbook(path: &Path, opts: &IngestOptions) -> Result<IngestResult, XlsxError> {
    if opts.max_cells == 0 {
        return Err(XlsxError::BadOptions("max_cells must be > 0".into()));
    }
    let mut archive = open_archive(path)?;
    for required in ["[Content_Types].xml", "xl/workbook.xml"] {
        if !has_member(&mut archive, required) {
            return Err(XlsxError::MissingPart {
                member: required.to_string(),
            });
        }
    }

    let sheets_meta = parse_workbook_sheets(&read_member(&mut archive, "xl/workbook.xml")?)?;
    let wb_rels = parse_relationships(
        &read_member(&mut archive, "xl/_rels/workbook.xml.rels")?,
        "xl/_rels/workbook.xml.rels",
    )?;
    let shared: Vec<String> = if has_member(&mut archive, "xl/sharedStrings.xml") {
        parse_shared_strings(&read_member(&mut archive, "xl/sharedStrings.xml")?)?
    } else {
        Vec::new()
    };

    // Pull raw sheet XML sequentially, then parse sheets in parallel and
    // reassemble in workbook order.
    let mut sheet_jobs = Vec::new();
    for (name, rid) in &sheets_meta {
        let target = wb_rels.get(rid).ok_or_else(|| {
            XlsxError::xml(
                "xl/_rels/workbook.xml.rels",
                format!("no relationship for sheet {name:?} ({rid})"),
            )
        })?;
        let member = resolve_target("xl", target);
        let xml = read_member(&mut archive, &member)?;
        sheet_jobs.push((name.clone(), member, xml));
    }

    let budget = AtomicU64::new(0);
    let parsed: Vec<ParsedSheet> = sheet_jobs
        .par_iter()
        .map(|(name, member, xml)| {
            parse_worksheet(xml, member, name, &shared, &budget, opts.max_cells)
        })
        .collect::<Result<_, _>>()?;

    let mut warnings = Vec::new();
    let mut sheets = Vec::with_capacity(parsed.len());
    let mut referenced_media: std::collections::HashSet<String> = std::collections::HashSet::new();
    let mut used_ids: std::collections::HashSet<String> = std::collections::HashSet::new();
    let mut media_cache: HashMap<String, Vec<u8>> = HashMap::new();

    for (i, mut ps) in parsed.into_iter().enumerate() {
        if opts.include_images && !ps.drawing_rids.is_empty() {
            let sheet_member = &sheet_jobs[i].1;
            let sheet_rels_member = rels_path_for(sheet_member);
            let sheet_dir = sheet_member.rsplit_once('/').map(|(d, _)| d).unwrap_or("");
            let rels = parse_relationships(
                &read_member(&mut archive, &sheet_rels_member)?,
                &sheet_rels_member,
            )?;
            for rid in &ps.drawing_rids {
                let Some(target) = rels.get(rid) else {
                    warnings.push(format!(
                        "{sheet_rels_member}: drawing relationship {rid} not found"
                    ));
                    continue;
                };
                let drawing_member = resolve_target(sheet_dir, target);
                let content =
                    parse_drawing(&read_member(&mut archive, &drawing_member)?, &drawing_member)?;
                if content.has_non_raster {
                    warnings.push(format!(
                        "sheet {:?}: non-raster drawing content in {drawing_member} was not ingested",
                        ps.sheet.name
                    ));
                }
                if content.pics.is_empty() {
                    continue;
                }
                let drawing_rels_member = rels_path_for(&drawing_member);
                let drawing_dir = drawing_member
                    .rsplit_once('/')
                    .map(|(d, _)| d)
                    .unwrap_or("");
                let drels = parse_relationships(
                    &read_member(&mut archive, &drawing_rels_member)?,
                    &drawing_rels_member,
                )?;
                for pic in content.pics {
                    let Some(rid) = &pic.embed_rid else { continue };
                    let Some(target) = drels.get(rid) else {
                        warnings.push(format!(
                            "{drawing_rels_member}: image relationship {rid} not found"
                        ));
                        continue;
                    };
                    let media_member = resolve_target(drawing_dir, target);
                    let Some(media_type) = media_type_for(&media_member) else {
                        warnings.push(format!(
                            "{media_member}: unsupported media type, image skipped"
                        ));
                        continue;
                    };
                    let bytes = match media_cache.get(&media_member) {
                        Some(b) => b.clone(),
                        None => {
                            let b = read_member(&mut archive, &media_member)?;
                            media_cache.insert(media_member.clone(), b.clone());
                            b
                        }
                    };
                    referenced_media.insert(media_member.clone());
                    let base_id = pic
                        .name
                        .clone()
                        .unwrap_or_else(|| file_stem(&media_member).to_string());
                    let mut id = base_id.clone();
                    let mut n = 2;
                    while !used_ids.insert(id.clone()) {
                        id = format!("{base_id}_{n}");
                        n += 1;
                    }
                    if id != base_id {
                        warnings.push(format!(
                            "duplicate image id {base_id:?} renamed to {id:?}"
                        ));
                    }
                    ps.sheet.images.push(ImageAsset {
                        id,
                        bytes,
                        media_type: media_type.to_string(),
                        anchor: pic
                            .anchor
                            .map(|(c, r)| CellAddress::new(&ps.sheet.name, c, r)),
                        caption: pic.descr,
                    });
                }
            }
        }
        sheets.push(ps.sheet);
    }

    // Media never referenced by a drawing still gets ingested, unanchored,
    // attached to the first sheet.
    if opts.include_images {
        let mut orphans: Vec<String> = archive
            .file_names()
            .filter(|n| n.starts_with("xl/media/") && !referenced_media.contains(*n))
            .map(str::to_string)
            .collect();
        orphans.sort();
        for member in orphans {
            let Some(media_type) = media_type_for(&member) else {
                warnings.push(format!("{member}: unsupported media type, image skipped"));
                continue;
            };
            let bytes = read_member(&mut archive, &member)?;
            let base_id = file_stem(&member).to_string();
            let mut id = base_id.clone();
            let mut n = 2;
            while !used_ids.insert(id.clone()) {
                id = format!("{base_id}_{n}");
                n += 1;
            }
            if let Some(first) = sheets.first_mut() {
                first.images.push(ImageAsset {
                    id,
                    bytes,
                    media_type: media_type.to_string(),
                    anchor: None,
                    caption: None,
                });
            }
        }
    }

    let workbook = Workbook::new(path.display().to_string(), sheets)?;
    Ok(IngestResult { workbook, warnings })
}

/// Sheet names in workbook order with approximate row counts taken from each
/// sheet's declared dimension.
pub fn list_sheets(path: &Path) -> Result<Vec<(String, u64)>, XlsxError> {
    let mut archive = open_archive(path)?;
    for required in ["[Content_Types].xml", "xl/workbook.xml"] {
        if !has_member(&mut archive, required) {
            return Err(XlsxError::MissingPart {
                member: required.to_string(),
            });
        }
    }
    let sheets_meta = parse_workbook_sheets(&read_member(&mut archive, "xl/workbook.xml")?)?;
    let wb_rels = parse_relationships(
        &read_member(&mut archive, "xl/_rels/workbook.xml.rels")?,
        "xl/_rels/workbook.xml.rels",
    )?;
    let mut out = Vec::new();
    for (name, rid) in sheets_meta {
        let target = wb_rels.get(&rid).ok_or_else(|| {
            XlsxError::xml(
                "xl/_rels/workbook.xml.rels",
                format!("no relationship for sheet {name:?} ({rid})"),
            )
        })?;
        let member = resolve_target("xl", target);
        let xml = read_member(&mut archive, &member)?;
        out.push((name, sheet_row_count(&xml, &member)?));
    }
    Ok(out)
}

fn sheet_row_count(xml: &[u8], member: &str) -> Result<u64, XlsxError> {
    let mut reader = Reader::from_reader(xml);
    let mut buf = Vec::new();
    let mut dimension: Option<String> = None;
    loop {
        match reader.read_event_into(&mut buf) {
            Ok(Event::Start(e)) | Ok(Event::Empty(e)) => match attr_local(e.name()) {
                b"dimension" => {
                    dimension = get_attr(&e, b"ref", member)?;
                }
                b"row" => {
                    // Degenerate or missing dimension: a real row means at
                    // least one occupied row.
                    return match dimension {
                        Some(d) if d.contains(':') => dimension_rows(&d, member),
                        _ => Ok(1),
                    };
                }
                _ => {}
            },
            Ok(Event::Eof) => break,
            Err(e) => return Err(XlsxError::xml(member, e)),
            _ => {}
        }
        buf.clear();
    }
    match dimension {
        Some(d) if d.contains(':') => dimension_rows(&d, member),
        _ => Ok(0),
    }
}

fn dimension_rows(dim: &str, member: &str) -> Result<u64, XlsxError> {
    let (a, b) = dim.split_once(':').expect("caller checked");
    let err = |source| XlsxError::Addr {
        member: member.to_string(),
        source,
    };
    let (_, r1) = parse_bare_cell(a).map_err(err)?;
    let (_, r2) = parse_bare_cell(b).map_err(err)?;
    Ok(u64::from(r2.max(r1) - r1.min(r2) + 1))
}
