//! Deterministic `.xlsx` writer for [`Workbook`] models.
//!
//! Supports exactly what the rest of this crate needs: cell values of every
//! model type, formulas with cached values, shared or inline strings, and
//! embedded images with one-cell anchors whose caption is stored as the
//! drawing's alternate text. Images with no anchor are written as orphan
//! media entries (no drawing part references them), which loses their
//! caption by construction.

use std::fs::File;
use std::io::{BufWriter, Seek, Write};
use std::path::Path;

use quick_xml::escape::escape;
use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, ZipWriter};

use super::XlsxError;
use crate::addr::col_letters;
use crate::workbook::{CellValue, ImageAsset, Sheet, UsedRange, Workbook};

#[derive(Debug, Clone, Default)]
pub struct WriteOptions {
    /// Write text cells as `inlineStr` instead of shared strings.
    pub inline_strings: bool,
}

const DATE_EPOCH_YMD: (i32, u32, u32) = (1899, 12, 30);

fn zip_options() -> SimpleFileOptions {
    SimpleFileOptions::default()
        .compression_method(CompressionMethod::Deflated)
        .last_modified_time(
            zip::DateTime::from_date_and_time(2024, 1, 1, 0, 0, 0).expect("fixed timestamp"),
        )
}

fn media_extension(media_type: &str) -> &'static str {
    match media_type {
        "image/png" => "png",
        "image/jpeg" => "jpeg",
        other => unreachable!("media type {other} rejected by model validation"),
    }
}

/// Render a date serial as ISO-8601 (date only when the serial has no time
/// fraction).
pub fn serial_to_iso(serial: f64) -> String {
    let days = serial.floor() as i64;
    let frac = serial - serial.floor();
    let epoch = chrono::NaiveDate::from_ymd_opt(DATE_EPOCH_YMD.0, DATE_EPOCH_YMD.1, DATE_EPOCH_YMD.2)
        .expect("valid epoch");
    let date = epoch + chrono::Duration::days(days);
    if frac == 0.0 {
        date.format("%Y-%m-%d").to_string()
    } else {
        let secs = (frac * 86_400.0).round() as i64;
        let dt = date.and_hms_opt(0, 0, 0).expect("midnight") + chrono::Duration::seconds(secs);
        dt.format("%Y-%m-%dT%H:%M:%S").to_string()
    }
}

fn dimension_ref(used: Option<UsedRange>) -> String {
    match used {
        None => "A1".to_string(),
        Some(u) => format!(
            "{}{}:{}{}",
            col_letters(u.min_col),
            u.min_row,
            col_letters(u.max_col),
            u.max_row
        ),
    }
}

/// Interns text cell content in first-occurrence order.
#[derive(Default)]
struct SharedStrings {
    by_text: std::collections::HashMap<String, usize>,
    ordered: Vec<String>,
    total_refs: usize,
}

impl SharedStrings {
    fn intern(&mut self, text: &str) -> usize {
        self.total_refs += 1;
        if let Some(&idx) = self.by_text.get(text) {
            return idx;
        }
        let idx = self.ordered.len();
        self.by_text.insert(text.to_string(), idx);
        self.ordered.push(text.to_string());
        idx
    }
}

fn text_elem(text: &str) -> String {
    if text != text.trim() {
        format!("<t xml:space=\"preserve\">{}</t>", escape(text))
    } else {
        format!("<t>{}</t>", escape(text))
    }
}

/// Write `wb` to `path` as an `.xlsx` archive.
pub fn write_workbook(wb: &Workbook, path: &Path, opts: &WriteOptions) -> Result<(), XlsxError> {
    let file = File::create(path).map_err(|e| XlsxError::io(path.display().to_string(), e))?;
    let mut zip = ZipWriter::new(BufWriter::new(file));
    let io_err = |e: std::io::Error| XlsxError::io(path.display().to_string(), e);
    let zip_err = |e: zip::result::ZipError| {
        XlsxError::io(
            path.display().to_string(),
            std::io::Error::other(e.to_string()),
        )
    };

    // Shared strings must be interned up front so sheet XML can reference
    // them by index while streaming.
    let mut sst = SharedStrings::default();
    if !opts.inline_strings {
        for sheet in &wb.sheets {
            for cell in sheet.cells() {
                if let CellValue::Text(t) = &cell.value {
                    if cell.formula.is_none() {
                        sst.intern(t);
                    }
                }
            }
        }
    }
    let has_sst = !opts.inline_strings && !sst.ordered.is_empty();

    // Assign global image numbers and per-sheet drawing numbers.
    let mut media: Vec<(&ImageAsset, String)> = Vec::new(); // asset, media path
    let mut sheet_drawings: Vec<Vec<usize>> = Vec::new(); // sheet -> indices into media (anchored only)
    let mut orphan_media: Vec<(&ImageAsset, String)> = Vec::new();
    for sheet in &wb.sheets {
        let mut anchored = Vec::new();
        for asset in &sheet.images {
            let n = media.len() + orphan_media.len() + 1;
            let name = format!("xl/media/image{n}.{}", media_extension(&asset.media_type));
            if asset.anchor.is_some() {
                anchored.push(media.len());
                media.push((asset, name));
            } else {
                orphan_media.push((asset, name));
            }
        }
        sheet_drawings.push(anchored);
    }

    // [Content_Types].xml
    let mut ct = String::new();
    ct.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n");
    ct.push_str("<Types xmlns=\"http://schemas.openxmlformats.org/package/2006/content-types\">");
    ct.push_str("<Default Extension=\"rels\" ContentType=\"application/vnd.openxmlformats-package.relationships+xml\"/>");
    ct.push_str("<Default Extension=\"xml\" ContentType=\"application/xml\"/>");
    ct.push_str("<Default Extension=\"png\" ContentType=\"image/png\"/>");
    ct.push_str("<Default Extension=\"jpeg\" ContentType=\"image/jpeg\"/>");
    ct.push_str("<Override PartName=\"/xl/workbook.xml\" ContentType=\"application/vnd.openxmlformats-officedocument.spreadsheetml.sheet.main+xml\"/>");
    for i in 1..=wb.sheets.len() {
        ct.push_str(&format!(
            "<Override PartName=\"/xl/worksheets/sheet{i}.xml\" ContentType=\"application/vnd.openxmlformats-officedocument.spreadsheetml.worksheet+xml\"/>"
        ));
    }
    if has_sst {
        ct.push_str("<Override PartName=\"/xl/sharedStrings.xml\" ContentType=\"application/vnd.openxmlformats-officedocument.spreadsheetml.sharedStrings+xml\"/>");
    }
    for (i, anchored) in sheet_drawings.iter().enumerate() {
        if !anchored.is_empty() {
            ct.push_str(&format!(
                "<Override PartName=\"/xl/drawings/drawing{}.xml\" ContentType=\"application/vnd.openxmlformats-officedocument.drawing+xml\"/>",
                i + 1
            ));
        }
    }
    ct.push_str("</Types>");
    zip.start_file("[Content_Types].xml", zip_options()).map_err(zip_err)?;
    zip.write_all(ct.as_bytes()).map_err(io_err)?;

    // _rels/.rels
    zip.start_file("_rels/.rels", zip_options()).map_err(zip_err)?;
    zip.write_all(
        concat!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n",
            "<Relationships xmlns=\"http://schemas.openxmlformats.org/package/2006/relationships\">",
            "<Relationship Id=\"rId1\" Type=\"http://schemas.openxmlformats.org/officeDocument/2006/relationships/officeDocument\" Target=\"xl/workbook.xml\"/>",
            "</Relationships>"
        )
        .as_bytes(),
    )
    .map_err(io_err)?;

    // xl/workbook.xml
    let mut wbx = String::new();
    wbx.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n");
    wbx.push_str("<workbook xmlns=\"http://schemas.openxmlformats.org/spreadsheetml/2006/main\" xmlns:r=\"http://schemas.openxmlformats.org/officeDocument/2006/relationships\">");
    wbx.push_str("<sheets>");
    for (i, sheet) in wb.sheets.iter().enumerate() {
        wbx.push_str(&format!(
            "<sheet name=\"{}\" sheetId=\"{}\" r:id=\"rId{}\"/>",
            escape(&sheet.name),
            i + 1,
            i + 1
        ));
    }
    wbx.push_str("</sheets></workbook>");
    zip.start_file("xl/workbook.xml", zip_options()).map_err(zip_err)?;
    zip.write_all(wbx.as_bytes()).map_err(io_err)?;

    // xl/_rels/workbook.xml.rels
    let mut rels = String::new();
    rels.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n");
    rels.push_str("<Relationships xmlns=\"http://schemas.openxmlformats.org/package/2006/relationships\">");
    for i in 1..=wb.sheets.len() {
        rels.push_str(&format!(
            "<Relationship Id=\"rId{i}\" Type=\"http://schemas.openxmlformats.org/officeDocument/2006/relationships/worksheet\" Target=\"worksheets/sheet{i}.xml\"/>"
        ));
    }
    if has_sst {
        rels.push_str(&format!(
            "<Relationship Id=\"rId{}\" Type=\"http://schemas.openxmlformats.org/officeDocument/2006/relationships/sharedStrings\" Target=\"sharedStrings.xml\"/>",
            wb.sheets.len() + 1
        ));
    }
    rels.push_str("</Relationships>");
    zip.start_file("xl/_rels/workbook.xml.rels", zip_options()).map_err(zip_err)?;
    zip.write_all(rels.as_bytes()).map_err(io_err)?;

    // Worksheets, streamed row by row.
    for (i, sheet) in wb.sheets.iter().enumerate() {
        let member = format!("xl/worksheets/sheet{}.xml", i + 1);
        zip.start_file(&member, zip_options()).map_err(zip_err)?;
        write_sheet_xml(&mut zip, sheet, &mut sst, opts, !sheet_drawings[i].is_empty())
            .map_err(io_err)?;

        if !sheet_drawings[i].is_empty() {
            let rels_member = format!("xl/worksheets/_rels/sheet{}.xml.rels", i + 1);
            zip.start_file(&rels_member, zip_options()).map_err(zip_err)?;
            let body = format!(
                concat!(
                    "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n",
                    "<Relationships xmlns=\"http://schemas.openxmlformats.org/package/2006/relationships\">",
                    "<Relationship Id=\"rId1\" Type=\"http://schemas.openxmlformats.org/officeDocument/2006/relationships/drawing\" Target=\"../drawings/drawing{}.xml\"/>",
                    "</Relationships>"
                ),
                i + 1
            );
            zip.write_all(body.as_bytes()).map_err(io_err)?;
        }
    }

    // Shared strings part.
    if has_sst {
        zip.start_file("xl/sharedStrings.xml", zip_options()).map_err(zip_err)?;
        let mut out = String::new();
        out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n");
        out.push_str(&format!(
            "<sst xmlns=\"http://schemas.openxmlformats.org/spreadsheetml/2006/main\" count=\"{}\" uniqueCount=\"{}\">",
            sst.total_refs,
            sst.ordered.len()
        ));
        for s in &sst.ordered {
            out.push_str("<si>");
            out.push_str(&text_elem(s));
            out.push_str("</si>");
        }
        out.push_str("</sst>");
        zip.write_all(out.as_bytes()).map_err(io_err)?;
    }

    // Drawings and their relationship parts.
    for (i, anchored) in sheet_drawings.iter().enumerate() {
        if anchored.is_empty() {
            continue;
        }
        let mut dx = String::new();
        dx.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n");
        dx.push_str("<xdr:wsDr xmlns:xdr=\"http://schemas.openxmlformats.org/drawingml/2006/spreadsheetDrawing\" xmlns:a=\"http://schemas.openxmlformats.org/drawingml/2006/main\" xmlns:r=\"http://schemas.openxmlformats.org/officeDocument/2006/relationships\">");
        let mut dr = String::new();
        dr.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n");
        dr.push_str("<Relationships xmlns=\"http://schemas.openxmlformats.org/package/2006/relationships\">");
        for (k, &media_idx) in anchored.iter().enumerate() {
            let (asset, media_path) = &media[media_idx];
            let anchor = asset.anchor.as_ref().expect("anchored image");
            let descr = asset
                .caption
                .as_ref()
                .map(|c| format!(" descr=\"{}\"", escape(c)))
                .unwrap_or_default();
            dx.push_str(&format!(
                concat!(
                    "<xdr:oneCellAnchor>",
                    "<xdr:from><xdr:col>{col}</xdr:col><xdr:colOff>0</xdr:colOff>",
                    "<xdr:row>{row}</xdr:row><xdr:rowOff>0</xdr:rowOff></xdr:from>",
                    "<xdr:ext cx=\"1828800\" cy=\"1371600\"/>",
                    "<xdr:pic><xdr:nvPicPr>",
                    "<xdr:cNvPr id=\"{id}\" name=\"{name}\"{descr}/>",
                    "<xdr:cNvPicPr/></xdr:nvPicPr>",
                    "<xdr:blipFill><a:blip r:embed=\"rId{rid}\"/><a:stretch><a:fillRect/></a:stretch></xdr:blipFill>",
                    "<xdr:spPr><a:prstGeom prst=\"rect\"><a:avLst/></a:prstGeom></xdr:spPr>",
                    "</xdr:pic><xdr:clientData/>",
                    "</xdr:oneCellAnchor>"
                ),
                col = anchor.col - 1,
                row = anchor.row - 1,
                id = k + 1,
                name = escape(&asset.id),
                descr = descr,
                rid = k + 1,
            ));
            let target = media_path.strip_prefix("xl/").expect("media under xl/");
            dr.push_str(&format!(
                "<Relationship Id=\"rId{}\" Type=\"http://schemas.openxmlformats.org/officeDocument/2006/relationships/image\" Target=\"../{target}\"/>",
                k + 1
            ));
        }
        dx.push_str("</xdr:wsDr>");
        dr.push_str("</Relationships>");
        zip.start_file(format!("xl/drawings/drawing{}.xml", i + 1), zip_options())
            .map_err(zip_err)?;
        zip.write_all(dx.as_bytes()).map_err(io_err)?;
        zip.start_file(
            format!("xl/drawings/_rels/drawing{}.xml.rels", i + 1),
            zip_options(),
        )
        .map_err(zip_err)?;
        zip.write_all(dr.as_bytes()).map_err(io_err)?;
    }

    // Media payloads (anchored first, then orphans, in assignment order).
    for (asset, name) in media.iter().chain(orphan_media.iter()) {
        zip.start_file(name.clone(), zip_options()).map_err(zip_err)?;
        zip.write_all(&asset.bytes).map_err(io_err)?;
    }

    zip.finish().map_err(zip_err)?;
    Ok(())
}

fn write_sheet_xml<W: Write + Seek>(
    zip: &mut ZipWriter<W>,
    sheet: &Sheet,
    sst: &mut SharedStrings,
    opts: &WriteOptions,
    has_drawing: bool,
) -> std::io::Result<()> {
    write!(
        zip,
        concat!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n",
            "<worksheet xmlns=\"http://schemas.openxmlformats.org/spreadsheetml/2006/main\" ",
            "xmlns:r=\"http://schemas.openxmlformats.org/officeDocument/2006/relationships\">",
            "<dimension ref=\"{}\"/><sheetData>"
        ),
        dimension_ref(sheet.used_range())
    )?;

    let mut row_buf = String::new();
    for row_num in sheet.occupied_rows() {
        row_buf.clear();
        row_buf.push_str(&format!("<row r=\"{row_num}\">"));
        for cell in sheet.row(row_num) {
            let r = format!("{}{}", col_letters(cell.col), cell.row);
            let formula = cell
                .formula
                .as_ref()
                .map(|f| format!("<f>{}</f>", escape(f)))
                .unwrap_or_default();
            match &cell.value {
                CellValue::Empty => {
                    // Formula with no cached value.
                    row_buf.push_str(&format!("<c r=\"{r}\">{formula}</c>"));
                }
                CellValue::Number(n) => {
                    row_buf.push_str(&format!("<c r=\"{r}\">{formula}<v>{n}</v></c>"));
                }
                CellValue::Bool(b) => {
                    let v = if *b { 1 } else { 0 };
                    row_buf.push_str(&format!("<c r=\"{r}\" t=\"b\">{formula}<v>{v}</v></c>"));
                }
                CellValue::Date { serial, display } => {
                    let iso = display.clone().unwrap_or_else(|| serial_to_iso(*serial));
                    row_buf.push_str(&format!(
                        "<c r=\"{r}\" t=\"d\">{formula}<v>{}</v></c>",
                        escape(&iso)
                    ));
                }
                CellValue::Text(t) => {
                    if cell.formula.is_some() {
                        // Cached string result of a formula.
                        row_buf.push_str(&format!(
                            "<c r=\"{r}\" t=\"str\">{formula}<v>{}</v></c>",
                            escape(t)
                        ));
                    } else if opts.inline_strings {
                        row_buf.push_str(&format!(
                            "<c r=\"{r}\" t=\"inlineStr\"><is>{}</is></c>",
                            text_elem(t)
                        ));
                    } else {
                        let idx = sst.intern(t);
                        row_buf.push_str(&format!("<c r=\"{r}\" t=\"s\"><v>{idx}</v></c>"));
                    }
                }
            }
        }
        row_buf.push_str("</row>");
        zip.write_all(row_buf.as_bytes())?;
    }

    write!(zip, "</sheetData>")?;
    if has_drawing {
        write!(zip, "<drawing r:id=\"rId1\"/>")?;
    }
    write!(zip, "</worksheet>")?;
    Ok(())
}
