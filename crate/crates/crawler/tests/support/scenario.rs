#![allow(dead_code)]

//! The offline fixture graph and catalog.
//!
//! Class hierarchy (P279): Q100 bridge <- Q101 suspension bridge <- Q102
//! footbridge <-> Q103 covered footbridge (a cycle); Q200 church building
//! <- Q201 cathedral; Q300 fountain; Q33506 museum.

use std::path::Path;

use nvskit_crawler::fixture::FixtureWriter;
use nvskit_crawler::{MemberKind, Result};

pub const CLASSES: [&str; 4] = ["Q100", "Q200", "Q300", "Q33506"];

pub fn write(dir: &Path) -> Result<()> {
    let w = FixtureWriter::new(dir)?;

    w.subclasses("Q100", &["Q101"])?;
    w.subclasses("Q101", &["Q102"])?;
    w.subclasses("Q102", &["Q103"])?;
    w.subclasses("Q103", &["Q102"])?;
    w.subclasses("Q200", &["Q201"])?;
    w.subclasses("Q201", &[])?;
    w.subclasses("Q300", &[])?;
    w.subclasses("Q33506", &[])?;

    w.instances("Q100", &["Q1000", "Q1008"])?;
    w.instances("Q101", &["Q1002"])?;
    w.instances("Q102", &["Q1001"])?;
    w.instances("Q103", &[])?;
    w.instances("Q200", &["Q1007"])?;
    w.instances("Q201", &["Q1004"])?;
    w.instances("Q300", &["Q1003"])?;
    w.instances("Q33506", &["Q1004", "Q1005", "Q1006"])?;

    w.entity("Q1000", "Old Bridge", &["Stari Most"], &["Q100"], Some("Old Bridge"))?;
    w.entity("Q1001", "Hanging Bridge", &[], &["Q102"], Some("Hanging Bridge"))?;
    w.entity("Q1002", "River Crossing", &[], &["Q101"], None)?;
    w.entity("Q1003", "Market Fountain", &[], &["Q300"], Some("Fountains"))?;
    w.entity("Q1004", "Berlin Cathedral", &["Berliner Dom"], &["Q201", "Q33506"], Some("Berlin Cathedral"))?;
    w.entity("Q1005", "City Museum", &[], &["Q33506"], Some("City Museum"))?;
    w.entity("Q1006", "Castle Museum", &[], &["Q33506", "Q23413"], Some("Castle Museum"))?;
    w.entity("Q1007", "Town Church", &[], &["Q200"], Some("Town Church"))?;
    w.entity("Q1008", "Bridge Gallery", &[], &["Q100"], Some("Bridge Gallery"))?;
    w.entity("Q483453", "fountain", &[], &["Q100"], Some("Fountains"))?;
    w.missing_entity("Q1009")?;

    w.category_info("Old Bridge", Some("Q1000"))?;
    w.category_info("Hanging Bridge", Some("Q1001"))?;
    w.category_info("Fountains", Some("Q483453"))?;
    w.category_info("Berlin Cathedral", Some("Q1004"))?;
    w.category_info("City Museum", Some("Q1005"))?;
    w.category_info("Castle Museum", Some("Q1006"))?;
    w.category_info("Town Church", None)?;
    w.category_info("Bridge Gallery", Some("Q1009"))?;

    let sub = MemberKind::Subcat;
    let file = MemberKind::File;
    w.members(
        "Berlin Cathedral",
        sub.clone(),
        &[
            "Berlin Cathedral crypt",
            "Churches in Berlin",
            "Interior of Berlin Cathedral",
            "Organs of Berliner Dom",
            "People associated with Berlin Cathedral",
            "berlin cathedral at night",
        ],
        500,
    )?;
    w.members("Berlin Cathedral", file.clone(), &["File:BC1.jpg", "File:BC2.jpg", "File:BC6.jpg"], 2)?;
    w.members("Berlin Cathedral crypt", sub.clone(), &["Berlin Cathedral"], 500)?;
    w.members("Berlin Cathedral crypt", file.clone(), &["File:BC5.jpg"], 500)?;
    w.members("Interior of Berlin Cathedral", sub.clone(), &["Altar of Berlin Cathedral"], 500)?;
    w.members("Interior of Berlin Cathedral", file.clone(), &["File:BC2.jpg", "File:BC3.jpg"], 500)?;
    w.members("Altar of Berlin Cathedral", sub.clone(), &["Berlin Cathedral altar details"], 500)?;
    w.members("Altar of Berlin Cathedral", file.clone(), &[], 500)?;
    w.members("Berlin Cathedral altar details", sub.clone(), &["Berlin Cathedral altar close-ups"], 500)?;
    w.members("Berlin Cathedral altar details", file.clone(), &[], 500)?;
    w.members("Berlin Cathedral altar close-ups", sub.clone(), &["Berlin Cathedral altar micro-details"], 500)?;
    w.members("Berlin Cathedral altar close-ups", file.clone(), &["File:BC4.jpg"], 500)?;
    w.members("Berlin Cathedral altar micro-details", sub.clone(), &[], 500)?;
    w.members("Berlin Cathedral altar micro-details", file.clone(), &["File:Deep.jpg"], 500)?;
    w.members("Organs of Berliner Dom", sub.clone(), &[], 500)?;
    w.members("Organs of Berliner Dom", file.clone(), &["File:Organ.jpg"], 500)?;
    w.members("berlin cathedral at night", sub.clone(), &[], 500)?;
    w.members("berlin cathedral at night", file.clone(), &["File:BC7.jpg"], 500)?;
    w.members("People associated with Berlin Cathedral", sub.clone(), &[], 500)?;
    w.members("People associated with Berlin Cathedral", file.clone(), &["File:Person.jpg"], 500)?;
    w.members("Churches in Berlin", sub.clone(), &[], 500)?;
    w.members("Churches in Berlin", file.clone(), &["File:Church.jpg"], 500)?;

    w.members("Old Bridge", sub.clone(), &["Bridges in Mostar", "Old Bridge at night", "Stari Most in winter"], 500)?;
    w.members("Old Bridge", file.clone(), &["File:OB1.jpg", "File:OB2.jpg"], 500)?;
    w.members("Old Bridge at night", sub.clone(), &[], 500)?;
    w.members("Old Bridge at night", file.clone(), &["File:OB3.jpg", "File:OB1.jpg"], 500)?;
    w.members("Stari Most in winter", sub.clone(), &[], 500)?;
    w.members("Stari Most in winter", file.clone(), &["File:OB4.jpg"], 500)?;
    w.members("Hanging Bridge", sub.clone(), &[], 500)?;
    w.members("Hanging Bridge", file.clone(), &["File:HB1.jpg"], 500)?;
    w.members("Castle Museum", sub.clone(), &["Paintings in Castle Museum"], 500)?;
    w.members("Castle Museum", file.clone(), &["File:CM1.jpg"], 500)?;

    let licensed = [
        "BC1", "BC2", "BC3", "BC4", "BC6", "BC7", "Organ", "Person", "Church", "Deep", "OB1", "OB2", "OB3", "OB4",
        "HB1", "CM1",
    ];
    for (i, name) in licensed.iter().enumerate() {
        let title = format!("File:{name}.jpg");
        let url = format!("https://upload.example.org/{name}.jpg");
        let capture = format!("2019-07-{:02} 10:00:00", 1 + i % 28);
        w.file_info(&title, &url, Some("CC BY-SA 4.0"), Some(&capture))?;
    }
    w.file_info("File:BC5.jpg", "https://upload.example.org/BC5.jpg", None, None)?;
    Ok(())
}
