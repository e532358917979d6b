use std::collections::BTreeMap;
use std::io::BufRead;

use serde::Serialize;
use serde_json::{Map, Value};

use super::document::{DocType, Discipline, Document, Level, Status};
use super::normalize::normalize_bytes;
use super::CorpusError;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub ingested: usize,
    pub skipped: usize,
    /// `(line number, reason)` for every skipped record, 1-based.
    pub skip_reasons: Vec<(usize, String)>,
}

/// Streams documents out of a line-delimited record source.
///
/// Malformed records are counted and skipped; only read errors on the
/// underlying stream surface as `Err`, after which the iterator is exhausted.
pub struct Ingestor<R> {
    reader: R,
    line_no: usize,
    report: IngestReport,
    preserve_state: bool,
    done: bool,
    buf: Vec<u8>,
}

impl<R: BufRead> Ingestor<R> {
    /// Fresh acquisition: every document comes out active at L0.
    pub fn new(reader: R) -> Self {
        Ingestor {
            reader,
            line_no: 0,
            report: IngestReport::default(),
            preserve_state: false,
            done: false,
            buf: Vec::new(),
        }
    }

    /// Reads previously written stage output, keeping `stage` and `status`.
    pub fn resuming(reader: R) -> Self {
        Ingestor {
            preserve_state: true,
            ..Self::new(reader)
        }
    }

    pub fn report(&self) -> &IngestReport {
        &self.report
    }

    pub fn into_report(self) -> IngestReport {
        self.report
    }

    fn skip(&mut self, reason: String) {
        self.report.skipped += 1;
        self.report.skip_reasons.push((self.line_no, reason));
    }
}

impl<R: BufRead> Iterator for Ingestor<R> {
    type Item = Result<Document, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            self.buf.clear();
            match self.reader.read_until(b'\n', &mut self.buf) {
                Ok(0) => self.done = true,
                Ok(_) => {
                    self.line_no += 1;
                    let line = normalize_bytes(&self.buf);
                    if line.trim().is_empty() {
                        continue;
                    }
                    match parse_record(&line, self.preserve_state) {
                        Ok(doc) => {
                            self.report.ingested += 1;
                            return Some(Ok(doc));
                        }
                        Err(reason) => self.skip(reason),
                    }
                }
                Err(e) => {
                    self.done = true;
                    return Some(Err(CorpusError::Io(e)));
                }
            }
        }
        None
    }
}

fn parse_record(line: &str, preserve_state: bool) -> Result<Document, String> {
    let value: Value = serde_json::from_str(line).map_err(|_| "invalid_json".to_string())?;
    let Value::Object(obj) = value else {
        return Err("not_an_object".into());
    };
    let id = match obj.get("id") {
        Some(Value::String(s)) if !s.is_empty() => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        Some(_) => return Err("bad_field:id".into()),
        None => return Err("missing_field:id".into()),
    };
    let text = match obj.get("text") {
        Some(Value::String(s)) => s,
        Some(_) => return Err("bad_field:text".into()),
        None => return Err("missing_field:text".into()),
    };
    let mut doc = Document::new(id, text);
    doc.source = optional_string(&obj, "source")?;
    if let Some(dt) = field::<DocType>(&obj, "doc_type")? {
        doc.doc_type = dt;
    }
    doc.discipline = field::<Discipline>(&obj, "discipline")?;
    if let Some(Value::Object(labels)) = obj.get("labels") {
        doc.labels = labels
            .iter()
            .map(|(k, v)| {
                let v = match v {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                (k.clone(), v)
            })
            .collect::<BTreeMap<_, _>>();
    } else if obj.get("labels").is_some_and(|v| !v.is_null()) {
        return Err("bad_field:labels".into());
    }
    if preserve_state {
        doc.token_count = field::<u64>(&obj, "token_count")?;
        if let Some(stage) = field::<Level>(&obj, "stage")? {
            doc.advance(stage).map_err(|_| "bad_field:stage".to_string())?;
        }
        match field::<Status>(&obj, "status")? {
            Some(Status::Dropped(r)) => doc.drop_with(r),
            Some(Status::Failed(r)) => doc.fail_with(r),
            _ => {}
        }
    }
    Ok(doc)
}

fn optional_string(obj: &Map<String, Value>, key: &str) -> Result<Option<String>, String> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(format!("bad_field:{key}")),
    }
}

fn field<T: serde::de::DeserializeOwned>(
    obj: &Map<String, Value>,
    key: &str,
) -> Result<Option<T>, String> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v.clone())
            .map(Some)
            .map_err(|_| format!("bad_field:{key}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{self, Cursor, Read};

    #[test]
    fn minimal_record() {
        let mut it = Ingestor::new(Cursor::new(r#"{"id":"a","text":"hello"}"#));
        let doc = it.next().unwrap().unwrap();
        assert_eq!(doc.id, "a");
        assert_eq!(doc.byte_len(), 5);
        assert_eq!(doc.stage(), Level::L0);
        assert!(doc.is_active());
        assert!(it.next().is_none());
    }

    #[test]
    fn missing_text_is_skipped() {
        let mut it = Ingestor::new(Cursor::new(r#"{"id":"a"}"#));
        assert!(it.next().is_none());
        assert_eq!(it.report().skipped, 1);
        assert_eq!(it.report().skip_reasons[0].1, "missing_field:text");
    }

    #[test]
    fn three_records_one_malformed() {
        let input = concat!(
            r#"{"id":"a","text":"one","doc_type":"book"}"#,
            "\n",
            r#"{"id":"b","text": 12"#,
            "\n\n",
            r#"{"id":"c","text":"three","discipline":"physics","labels":{"fdc_code":535}}"#,
            "\n"
        );
        let mut it = Ingestor::new(Cursor::new(input));
        let docs: Vec<_> = it.by_ref().map(Result::unwrap).collect();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].doc_type, DocType::Book);
        assert_eq!(docs[1].discipline, Some(Discipline::Physics));
        assert_eq!(docs[1].labels["fdc_code"], "535");
        let report = it.into_report();
        assert_eq!((report.ingested, report.skipped), (2, 1));
        assert_eq!(report.skip_reasons[0], (2, "invalid_json".to_string()));
    }

    #[test]
    fn fresh_ingest_ignores_recorded_state() {
        let line = r#"{"id":"a","text":"x","stage":"L4","status":{"dropped":"undersize"}}"#;
        let fresh = Ingestor::new(Cursor::new(line)).next().unwrap().unwrap();
        assert_eq!(fresh.stage(), Level::L0);
        assert!(fresh.is_active());
        let resumed = Ingestor::resuming(Cursor::new(line)).next().unwrap().unwrap();
        assert_eq!(resumed.stage(), Level::L4);
        assert_eq!(resumed.status(), &Status::Dropped("undersize".into()));
    }

    #[test]
    fn invalid_utf8_in_text_is_replaced_not_skipped() {
        let mut bytes = br#"{"id":"a","text":"ab"#.to_vec();
        bytes.push(0xff);
        bytes.extend_from_slice(br#"c"}"#);
        let doc = Ingestor::new(Cursor::new(bytes)).next().unwrap().unwrap();
        assert_eq!(doc.text(), "ab\u{fffd}c");
    }

    struct Broken;
    impl Read for Broken {
        fn read(&mut self, _: &mut [u8]) -> io::Result<usize> {
            Err(io::Error::new(io::ErrorKind::Other, "disk gone"))
        }
    }

    #[test]
    fn unreadable_stream_is_an_error() {
        let mut it = Ingestor::new(io::BufReader::new(Broken));
        assert!(matches!(it.next(), Some(Err(CorpusError::Io(_)))));
        assert!(it.next().is_none());
    }
}
