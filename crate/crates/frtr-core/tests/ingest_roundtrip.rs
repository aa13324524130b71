//! Writer / reader round trips and reader error paths.

use std::io::Write;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use frtr_core::addr::CellAddress;
use frtr_core::workbook::{CellValue, ImageAsset, Sheet, Workbook};
use frtr_core::xlsx::{
    ingest_workbook, list_sheets, write_workbook, IngestOptions, WriteOptions, XlsxError,
};

fn tmpfile(name: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(name);
    (dir, path)
}

fn roundtrip(wb: &Workbook, opts: &WriteOptions) -> Workbook {
    let (_dir, path) = tmpfile("book.xlsx");
    write_workbook(wb, &path, opts).unwrap();
    let result = ingest_workbook(&path, &IngestOptions::default()).unwrap();
    assert!(result.warnings.is_empty(), "warnings: {:?}", result.warnings);
    result.workbook
}

fn cells_match(a: &Workbook, b: &Workbook) {
    assert_eq!(a.sheets.len(), b.sheets.len());
    for (sa, sb) in a.sheets.iter().zip(&b.sheets) {
        assert_eq!(sa.name, sb.name);
        assert_eq!(sa.used_range(), sb.used_range(), "sheet {}", sa.name);
        assert_eq!(sa.n_cells(), sb.n_cells(), "sheet {}", sa.name);
        for cell in sa.cells() {
            let got = sb.cell(cell.col, cell.row).unwrap_or_else(|| {
                panic!("missing cell ({}, {}) on {}", cell.col, cell.row, sa.name)
            });
            assert_eq!(cell.value, got.value, "cell ({}, {})", cell.col, cell.row);
            assert_eq!(cell.formula, got.formula, "cell ({}, {})", cell.col, cell.row);
        }
    }
}

#[test]
fn minimal_one_cell_workbook() {
    let mut s = Sheet::new("Sheet1");
    s.set_value(1, 1, CellValue::Text("x".into()));
    let wb = Workbook::new("mini", vec![s]).unwrap();
    let back = roundtrip(&wb, &WriteOptions::default());
    assert_eq!(back.sheets.len(), 1);
    assert_eq!(back.sheets[0].n_cells(), 1);
    let used = back.sheets[0].used_range().unwrap();
    assert_eq!((used.min_col, used.min_row, used.max_col, used.max_row), (1, 1, 1, 1));
    assert_eq!(
        back.sheets[0].cell(1, 1).unwrap().value,
        CellValue::Text("x".into())
    );
}

#[test]
fn all_value_types_round_trip_via_shared_and_inline_strings() {
    let mut s = Sheet::new("Data");
    s.set_value(1, 1, CellValue::Text("plain".into()));
    s.set_value(2, 1, CellValue::Text("  padded  ".into()));
    s.set_value(3, 1, CellValue::Text("Widget & Co <Ltd> \"quoted\"".into()));
    s.set_value(1, 2, CellValue::Number(12450.0));
    s.set_value(2, 2, CellValue::Number(0.1));
    s.set_value(3, 2, CellValue::Number(-3.75));
    s.set_value(1, 3, CellValue::Bool(true));
    s.set_value(2, 3, CellValue::Bool(false));
    s.set_value(
        3,
        3,
        CellValue::Date {
            serial: 45000.0,
            display: Some("2023-03-15".into()),
        },
    );
    // Repeated text exercises shared-string interning.
    s.set_value(1, 4, CellValue::Text("plain".into()));
    let wb = Workbook::new("types", vec![s]).unwrap();

    for opts in [
        WriteOptions::default(),
        WriteOptions {
            inline_strings: true,
        },
    ] {
        let back = roundtrip(&wb, &opts);
        cells_match(&wb, &back);
    }
}

#[test]
fn cross_sheet_formula_text_is_verbatim() {
    let mut s1 = Sheet::new("Sheet1");
    for r in 2..=10 {
        s1.set_value(2, r, CellValue::Number(r as f64));
    }
    let mut s2 = Sheet::new("Sheet2");
    s2.set_value(3, 5, CellValue::Number(4.0));
    s2.set(
        1,
        1,
        CellValue::Number(58.0),
        Some("SUM(Sheet1!B2:B100, Sheet2!C5:C50)".into()),
    );
    let wb = Workbook::new("formulas", vec![s1, s2]).unwrap();
    let back = roundtrip(&wb, &WriteOptions::default());
    let cell = back.sheets[1].cell(1, 1).unwrap();
    assert_eq!(
        cell.formula.as_deref(),
        Some("SUM(Sheet1!B2:B100, Sheet2!C5:C50)")
    );
    assert_eq!(cell.value, CellValue::Number(58.0));
}

#[test]
fn formula_without_cached_value_round_trips() {
    let mut s = Sheet::new("S");
    s.set(1, 1, CellValue::Empty, Some("SUM(A2:A9)".into()));
    let wb = Workbook::new("f", vec![s]).unwrap();
    let back = roundtrip(&wb, &WriteOptions::default());
    let cell = back.sheets[0].cell(1, 1).unwrap();
    assert_eq!(cell.formula.as_deref(), Some("SUM(A2:A9)"));
    assert!(cell.value.is_empty());
}

#[test]
fn embedded_png_round_trips_with_anchor_and_caption() {
    let png = frtr_core::bench::encode_png(4, 4, &[200u8; 48]);
    let digest = Sha256::digest(&png);
    let mut s = Sheet::new("Charts");
    s.set_value(1, 1, CellValue::Text("title".into()));
    s.images.push(ImageAsset {
        id: "Chart_001".into(),
        bytes: png,
        media_type: "image/png".into(),
        anchor: Some(CellAddress::new("Charts", 3, 3)),
        caption: Some("Q4 revenue chart".into()),
    });
    let wb = Workbook::new("imgs", vec![s]).unwrap();
    let back = roundtrip(&wb, &WriteOptions::default());
    let asset = &back.sheets[0].images[0];
    assert_eq!(asset.id, "Chart_001");
    assert_eq!(asset.media_type, "image/png");
    assert_eq!(
        asset.anchor,
        Some(CellAddress::new("Charts", 3, 3)),
        "anchor resolves through the drawing part"
    );
    assert_eq!(asset.caption.as_deref(), Some("Q4 revenue chart"));
    assert_eq!(Sha256::digest(&asset.bytes), digest);
}

#[test]
fn unanchored_media_is_ingested_without_anchor() {
    let png = frtr_core::bench::encode_png(2, 2, &[10u8; 12]);
    let mut s = Sheet::new("S");
    s.set_value(1, 1, CellValue::Text("x".into()));
    s.images.push(ImageAsset {
        id: "floating".into(),
        bytes: png.clone(),
        media_type: "image/png".into(),
        anchor: None,
        caption: Some("lost on write".into()),
    });
    let wb = Workbook::new("orphan", vec![s]).unwrap();
    let (_dir, path) = tmpfile("orphan.xlsx");
    write_workbook(&wb, &path, &WriteOptions::default()).unwrap();
    let back = ingest_workbook(&path, &IngestOptions::default())
        .unwrap()
        .workbook;
    assert_eq!(back.sheets[0].images.len(), 1);
    let asset = &back.sheets[0].images[0];
    assert_eq!(asset.anchor, None);
    assert_eq!(asset.bytes, png);
    // Orphan media has no drawing part, so the caption cannot survive.
    assert_eq!(asset.caption, None);
}

#[test]
fn images_can_be_skipped() {
    let png = frtr_core::bench::encode_png(2, 2, &[10u8; 12]);
    let mut s = Sheet::new("S");
    s.set_value(1, 1, CellValue::Text("x".into()));
    s.images.push(ImageAsset {
        id: "c".into(),
        bytes: png,
        media_type: "image/png".into(),
        anchor: Some(CellAddress::new("S", 1, 1)),
        caption: None,
    });
    let wb = Workbook::new("skip", vec![s]).unwrap();
    let (_dir, path) = tmpfile("skip.xlsx");
    write_workbook(&wb, &path, &WriteOptions::default()).unwrap();
    let back = ingest_workbook(
        &path,
        &IngestOptions {
            include_images: false,
            ..IngestOptions::default()
        },
    )
    .unwrap()
    .workbook;
    assert!(back.sheets[0].images.is_empty());
}

#[test]
fn not_a_zip_is_a_distinct_error() {
    let (_dir, path) = tmpfile("fake.xlsx");
    std::fs::write(&path, b"this is not a zip archive").unwrap();
    match ingest_workbook(&path, &IngestOptions::default()) {
        Err(XlsxError::NotZip { .. }) => {}
        other => panic!("expected NotZip, got {other:?}"),
    }
}

#[test]
fn missing_workbook_part_is_named() {
    let (_dir, path) = tmpfile("partial.xlsx");
    let file = std::fs::File::create(&path).unwrap();
    let mut zw = zip::ZipWriter::new(file);
    zw.start_file("[Content_Types].xml", zip::write::SimpleFileOptions::default())
        .unwrap();
    zw.write_all(b"<Types/>").unwrap();
    zw.finish().unwrap();
    match ingest_workbook(&path, &IngestOptions::default()) {
        Err(XlsxError::MissingPart { member }) => assert_eq!(member, "xl/workbook.xml"),
        other => panic!("expected MissingPart, got {other:?}"),
    }
}

#[test]
fn cell_budget_is_enforced() {
    let mut s = Sheet::new("S");
    for r in 1..=100 {
        s.set_value(1, r, CellValue::Number(r as f64));
    }
    let wb = Workbook::new("big", vec![s]).unwrap();
    let (_dir, path) = tmpfile("big.xlsx");
    write_workbook(&wb, &path, &WriteOptions::default()).unwrap();
    match ingest_workbook(
        &path,
        &IngestOptions {
            max_cells: 50,
            ..IngestOptions::default()
        },
    ) {
        Err(XlsxError::TooManyCells { limit: 50, member }) => {
            assert!(member.contains("sheet1.xml"), "member: {member}")
        }
        other => panic!("expected TooManyCells, got {other:?}"),
    }
}

#[test]
fn malformed_sheet_xml_is_an_xml_error() {
    let (_dir, path) = tmpfile("broken.xlsx");
    let file = std::fs::File::create(&path).unwrap();
    let mut zw = zip::ZipWriter::new(file);
    let opts = zip::write::SimpleFileOptions::default();
    zw.start_file("[Content_Types].xml", opts).unwrap();
    zw.write_all(b"<Types/>").unwrap();
    zw.start_file("xl/workbook.xml", opts).unwrap();
    zw.write_all(br#"<workbook><sheets><sheet name="S" sheetId="1" r:id="rId1"/></sheets></workbook>"#)
        .unwrap();
    zw.start_file("xl/_rels/workbook.xml.rels", opts).unwrap();
    zw.write_all(br#"<Relationships><Relationship Id="rId1" Target="worksheets/sheet1.xml"/></Relationships>"#)
        .unwrap();
    zw.start_file("xl/worksheets/sheet1.xml", opts).unwrap();
    zw.write_all(b"<worksheet><sheetData><row r=\"1\"><c r=\"A1\"><v>1</v></row></sheetData></worksheet>")
        .unwrap();
    zw.finish().unwrap();
    match ingest_workbook(&path, &IngestOptions::default()) {
        Err(XlsxError::Xml { member, .. }) => assert_eq!(member, "xl/worksheets/sheet1.xml"),
        other => panic!("expected Xml error, got {other:?}"),
    }
}

#[test]
fn non_raster_drawing_content_is_flagged() {
    // Build a workbook whose drawing holds a DrawingML chart frame instead
    // of a picture.
    let (_dir, path) = tmpfile("chart.xlsx");
    let file = std::fs::File::create(&path).unwrap();
    let mut zw = zip::ZipWriter::new(file);
    let opts = zip::write::SimpleFileOptions::default();
    zw.start_file("[Content_Types].xml", opts).unwrap();
    zw.write_all(b"<Types/>").unwrap();
    zw.start_file("xl/workbook.xml", opts).unwrap();
    zw.write_all(br#"<workbook><sheets><sheet name="S" sheetId="1" r:id="rId1"/></sheets></workbook>"#)
        .unwrap();
    zw.start_file("xl/_rels/workbook.xml.rels", opts).unwrap();
    zw.write_all(br#"<Relationships><Relationship Id="rId1" Target="worksheets/sheet1.xml"/></Relationships>"#)
        .unwrap();
    zw.start_file("xl/worksheets/sheet1.xml", opts).unwrap();
    zw.write_all(b"<worksheet><sheetData><row r=\"1\"><c r=\"A1\"><v>1</v></c></row></sheetData><drawing r:id=\"rId1\"/></worksheet>")
        .unwrap();
    zw.start_file("xl/worksheets/_rels/sheet1.xml.rels", opts).unwrap();
    zw.write_all(br#"<Relationships><Relationship Id="rId1" Target="../drawings/drawing1.xml"/></Relationships>"#)
        .unwrap();
    zw.start_file("xl/drawings/drawing1.xml", opts).unwrap();
    zw.write_all(br#"<xdr:wsDr xmlns:xdr="x"><xdr:twoCellAnchor><xdr:graphicFrame/></xdr:twoCellAnchor></xdr:wsDr>"#)
        .unwrap();
    zw.finish().unwrap();

    let result = ingest_workbook(&path, &IngestOptions::default()).unwrap();
    assert_eq!(result.workbook.sheets[0].images.len(), 0);
    assert!(
        result.warnings.iter().any(|w| w.contains("non-raster")),
        "warnings: {:?}",
        result.warnings
    );
}

#[test]
fn inline_string_cells_parse() {
    // Hand-built fixture exercising inlineStr independent of our writer's
    // default path.
    let (_dir, path) = tmpfile("inline.xlsx");
    let file = std::fs::File::create(&path).unwrap();
    let mut zw = zip::ZipWriter::new(file);
    let opts = zip::write::SimpleFileOptions::default();
    zw.start_file("[Content_Types].xml", opts).unwrap();
    zw.write_all(b"<Types/>").unwrap();
    zw.start_file("xl/workbook.xml", opts).unwrap();
    zw.write_all(br#"<workbook><sheets><sheet name="S" sheetId="1" r:id="rId1"/></sheets></workbook>"#)
        .unwrap();
    zw.start_file("xl/_rels/workbook.xml.rels", opts).unwrap();
    zw.write_all(br#"<Relationships><Relationship Id="rId1" Target="worksheets/sheet1.xml"/></Relationships>"#)
        .unwrap();
    zw.start_file("xl/worksheets/sheet1.xml", opts).unwrap();
    zw.write_all(
        b"<worksheet><sheetData><row r=\"1\">\
          <c r=\"A1\" t=\"inlineStr\"><is><t>hello &amp; goodbye</t></is></c>\
          <c r=\"B1\" t=\"str\"><v>cached</v></c>\
          </row></sheetData></worksheet>",
    )
    .unwrap();
    zw.finish().unwrap();

    let wb = ingest_workbook(&path, &IngestOptions::default())
        .unwrap()
        .workbook;
    assert_eq!(
        wb.sheets[0].cell(1, 1).unwrap().value,
        CellValue::Text("hello & goodbye".into())
    );
    assert_eq!(
        wb.sheets[0].cell(2, 1).unwrap().value,
        CellValue::Text("cached".into())
    );
}

#[test]
fn list_sheets_reports_names_in_order_and_dimension_rows() {
    let mut a = Sheet::new("First");
    for r in 1..=7 {
        a.set_value(1, r, CellValue::Number(r as f64));
    }
    let b = Sheet::new("Empty");
    let mut c = Sheet::new("Third");
    c.set_value(2, 5, CellValue::Number(1.0));
    c.set_value(2, 9, CellValue::Number(2.0));
    let wb = Workbook::new("multi", vec![a, b, c]).unwrap();
    let (_dir, path) = tmpfile("multi.xlsx");
    write_workbook(&wb, &path, &WriteOptions::default()).unwrap();
    let listed = list_sheets(&path).unwrap();
    assert_eq!(
        listed,
        vec![
            ("First".to_string(), 7),
            ("Empty".to_string(), 0),
            ("Third".to_string(), 5),
        ]
    );
}

#[test]
fn writer_output_is_deterministic() {
    let mut s = Sheet::new("S");
    for r in 1..=20 {
        s.set_value(1, r, CellValue::Text(format!("v{r}")));
        s.set_value(2, r, CellValue::Number(r as f64 * 1.5));
    }
    let wb = Workbook::new("det", vec![s]).unwrap();
    let (_dir1, p1) = tmpfile("a.xlsx");
    let (_dir2, p2) = tmpfile("b.xlsx");
    write_workbook(&wb, &p1, &WriteOptions::default()).unwrap();
    write_workbook(&wb, &p2, &WriteOptions::default()).unwrap();
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
}

#[test]
fn memory_stays_proportional_to_content_not_declared_range() {
    // A sheet whose single cell sits at a huge address: the sparse model
    // must hold exactly one cell.
    let mut s = Sheet::new("S");
    s.set_value(16_000, 1_000_000, CellValue::Number(1.0));
    let wb = Workbook::new("sparse", vec![s]).unwrap();
    let back = roundtrip(&wb, &WriteOptions::default());
    assert_eq!(back.sheets[0].n_cells(), 1);
    let used = back.sheets[0].used_range().unwrap();
    assert_eq!((used.min_col, used.min_row), (16_000, 1_000_000));
}
