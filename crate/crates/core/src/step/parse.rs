use super::lexer::{Lexer, Spanned, Token};
use super::{HeaderRecord, Parameter, StepError, StepHeader, StepInstance, StepModel, COMPLEX_ENTITY};
use std::collections::BTreeMap;

/// Parses a Part 21 exchange file and checks that every reference resolves.
pub fn parse_step(bytes: &[u8]) -> Result<StepModel, StepError> {
    let tokens = Lexer::new(bytes).tokenize()?;
    let mut p = Parser { tokens, pos: 0 };
    let model = p.file()?;
    check_references(&model)?;
    Ok(model)
}

fn check_references(model: &StepModel) -> Result<(), StepError> {
    for inst in model.instances.values() {
        let mut missing = None;
        for arg in &inst.args {
            arg.for_each_ref(&mut |r| {
                if missing.is_none() && !model.instances.contains_key(&r) {
                    missing = Some(r);
                }
            });
        }
        if let Some(target) = missing {
            return Err(StepError::DanglingReference { target, from: inst.id });
        }
    }
    Ok(())
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|s| &s.token)
    }

    fn next(&mut self) -> Result<Token, StepError> {
        let t = self
            .tokens
            .get(self.pos)
            .map(|s| s.token.clone())
            .ok_or_else(|| self.err("unexpected end of file"))?;
        self.pos += 1;
        Ok(t)
    }

    fn err(&self, message: impl Into<String>) -> StepError {
        let (line, column) = match self.tokens.get(self.pos).or(self.tokens.last()) {
            Some(s) => (s.line, s.column),
            None => (1, 1),
        };
        StepError::Syntax { line, column, message: message.into() }
    }

    fn expect(&mut self, want: &Token) -> Result<(), StepError> {
        match self.peek() {
            Some(t) if t == want => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(self.err(format!("expected {want:?}, found {t:?}"))),
            None => Err(self.err(format!("expected {want:?}, found end of file"))),
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), StepError> {
        match self.peek() {
            Some(Token::Keyword(k)) if k == kw => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err(format!("expected {kw}"))),
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Token::Keyword(k)) if k == kw)
    }

    fn file(&mut self) -> Result<StepModel, StepError> {
        self.expect_keyword("ISO-10303-21")?;
        self.expect(&Token::Semicolon)?;
        self.expect_keyword("HEADER")?;
        self.expect(&Token::Semicolon)?;
        let mut header = StepHeader::default();
        while !self.is_keyword("ENDSEC") {
            let (name, args) = self.record()?;
            self.expect(&Token::Semicolon)?;
            header.records.push(HeaderRecord { name, args });
        }
        self.expect_keyword("ENDSEC")?;
        self.expect(&Token::Semicolon)?;

        let mut instances = BTreeMap::new();
        while self.is_keyword("DATA") {
            self.pos += 1;
            if self.peek() == Some(&Token::LParen) {
                self.args()?;
            }
            self.expect(&Token::Semicolon)?;
            while !self.is_keyword("ENDSEC") {
                let inst = self.instance()?;
                if instances.contains_key(&inst.id) {
                    return Err(StepError::DuplicateId(inst.id));
                }
                instances.insert(inst.id, inst);
            }
            self.expect_keyword("ENDSEC")?;
            self.expect(&Token::Semicolon)?;
        }
        self.expect_keyword("END-ISO-10303-21")?;
        self.expect(&Token::Semicolon)?;
        Ok(StepModel { header, instances })
    }

    fn instance(&mut self) -> Result<StepInstance, StepError> {
        let id = match self.next()? {
            Token::Ref(id) => id,
            t => {
                self.pos -= 1;
                return Err(self.err(format!("expected instance name, found {t:?}")));
            }
        };
        self.expect(&Token::Equals)?;
        let inst = if self.peek() == Some(&Token::LParen) {
            self.pos += 1;
            let mut parts = Vec::new();
            while self.peek() != Some(&Token::RParen) {
                let (name, args) = self.record()?;
                parts.push(Parameter::Typed { name, args });
            }
            self.expect(&Token::RParen)?;
            StepInstance { id, entity_type: COMPLEX_ENTITY.to_string(), args: parts }
        } else {
            let (entity_type, args) = self.record()?;
            StepInstance { id, entity_type, args }
        };
        self.expect(&Token::Semicolon)?;
        Ok(inst)
    }

    fn record(&mut self) -> Result<(String, Vec<Parameter>), StepError> {
        let name = match self.next()? {
            Token::Keyword(k) => k,
            t => {
                self.pos -= 1;
                return Err(self.err(format!("expected keyword, found {t:?}")));
            }
        };
        let args = self.args()?;
        Ok((name, args))
    }

    fn args(&mut self) -> Result<Vec<Parameter>, StepError> {
        self.expect(&Token::LParen)?;
        let mut out = Vec::new();
        if self.peek() == Some(&Token::RParen) {
            self.pos += 1;
            return Ok(out);
        }
        loop {
            out.push(self.param()?);
            match self.next()? {
                Token::Comma => {}
                Token::RParen => return Ok(out),
                t => {
                    self.pos -= 1;
                    return Err(self.err(format!("expected ',' or ')', found {t:?}")));
                }
            }
        }
    }

    fn param(&mut self) -> Result<Parameter, StepError> {
        Ok(match self.next()? {
            Token::Integer(i) => Parameter::Integer(i),
            Token::Real(x) => Parameter::Real(x),
            Token::Str(s) => Parameter::String(s),
            Token::Enum(e) => Parameter::Enum(e),
            Token::Ref(r) => Parameter::Ref(r),
            Token::Binary(b) => Parameter::Binary(b),
            Token::Dollar => Parameter::Unset,
            Token::Star => Parameter::Derived,
            Token::LParen => {
                self.pos -= 1;
                Parameter::List(self.args()?)
            }
            Token::Keyword(name) => Parameter::Typed { name, args: self.args()? },
            t => {
                self.pos -= 1;
                return Err(self.err(format!("unexpected {t:?} in parameter list")));
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wrap(data: &str) -> String {
        format!(
            "ISO-10303-21;\nHEADER;\nFILE_DESCRIPTION(('d'),'2;1');\nFILE_NAME('x.stp','',(''),(''),'','','');\nFILE_SCHEMA(('CONFIG_CONTROL_DESIGN'));\nENDSEC;\nDATA;\n{data}\nENDSEC;\nEND-ISO-10303-21;\n"
        )
    }

    #[test]
    fn minimal_point() {
        let m = parse_step(wrap("#1=CARTESIAN_POINT('',(0.,0.,0.));").as_bytes()).unwrap();
        assert_eq!(m.instances.len(), 1);
        let p = m.get(1).unwrap();
        assert_eq!(p.entity_type, "CARTESIAN_POINT");
        assert_eq!(
            p.args,
            vec![
                Parameter::String(String::new()),
                Parameter::List(vec![Parameter::Real(0.0), Parameter::Real(0.0), Parameter::Real(0.0)])
            ]
        );
        assert_eq!(m.header.schemas(), vec!["CONFIG_CONTROL_DESIGN".to_string()]);
        assert_eq!(m.header.file_name().as_deref(), Some("x.stp"));
    }

    #[test]
    fn dangling_reference() {
        let err = parse_step(wrap("#1=VERTEX_POINT('',#99);").as_bytes()).unwrap_err();
        assert_eq!(err, StepError::DanglingReference { target: 99, from: 1 });
    }

    #[test]
    fn duplicate_id() {
        let src = wrap("#1=CARTESIAN_POINT('',(0.,0.,0.));\n#1=CARTESIAN_POINT('',(1.,0.,0.));");
        assert_eq!(parse_step(src.as_bytes()).unwrap_err(), StepError::DuplicateId(1));
    }

    #[test]
    fn complex_and_typed() {
        let src = wrap(
            "#1=(LENGTH_UNIT()NAMED_UNIT(*)SI_UNIT(.MILLI.,.METRE.));\n#2=UNCERTAINTY_MEASURE_WITH_UNIT(LENGTH_MEASURE(1.E-07),#1,'d','');\n#3=SOMETHING_ELSE($,\"0F\",(#1,#2));",
        );
        let m = parse_step(src.as_bytes()).unwrap();
        let c = m.get(1).unwrap();
        assert!(c.is_complex());
        assert_eq!(c.args.len(), 3);
        assert_eq!(m.get(2).unwrap().args[0].as_f64(), Some(1e-7));
        assert_eq!(m.get(3).unwrap().entity_type, "SOMETHING_ELSE");
    }

    #[test]
    fn syntax_error_position() {
        let err = parse_step(wrap("#1=FOO(1,,2);").as_bytes()).unwrap_err();
        match err {
            StepError::Syntax { line, .. } => assert_eq!(line, 8),
            e => panic!("{e:?}"),
        }
    }
}
