use super::lexer::{tokenize, Mode, SyntaxError, Tok, Token};
use super::{vocab, BlankId, Graph, Iri, Literal, Node, PrefixMap, Triple};

pub use super::lexer::SyntaxError as TurtleError;

/// Parses a Turtle document. Relative IRIs are an error.
pub fn parse_turtle(input: &str) -> Result<Graph, TurtleError> {
    parse_turtle_with_base(input, None)
}

/// Parses a Turtle document, resolving relative IRIs against `base`.
pub fn parse_turtle_with_base(input: &str, base: Option<&str>) -> Result<Graph, TurtleError> {
    let tokens = tokenize(input, Mode::Turtle)?;
    let mut parser = TermParser::new(tokens, base.map(str::to_owned));
    let mut graph = Graph::new();
    while !parser.at(&Tok::Eof) {
        parser.statement(&mut graph)?;
    }
    *graph.prefixes_mut() = parser.prefixes;
    Ok(graph)
}

/// Token cursor with prefix and base handling, shared with the SPARQL parser.
pub(crate) struct TermParser {
    tokens: Vec<Token>,
    pos: usize,
    pub prefixes: PrefixMap,
    base: Option<String>,
    anon: usize,
}

impl TermParser {
    pub fn new(tokens: Vec<Token>, base: Option<String>) -> Self {
        TermParser {
            tokens,
            pos: 0,
            prefixes: PrefixMap::new(),
            base,
            anon: 0,
        }
    }

    pub fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    pub fn peek_at(&self, offset: usize) -> &Token {
        &self.tokens[(self.pos + offset).min(self.tokens.len() - 1)]
    }

    pub fn at(&self, tok: &Tok) -> bool {
        &self.peek().tok == tok
    }

    pub fn at_word(&self, word: &str) -> bool {
        matches!(&self.peek().tok, Tok::Word(w) if w.eq_ignore_ascii_case(word))
    }

    pub fn next(&mut self) -> Token {
        let t = self.peek().clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    pub fn expect(&mut self, tok: &Tok) -> Result<Token, SyntaxError> {
        if self.at(tok) {
            Ok(self.next())
        } else {
            Err(self.unexpected(&format!("expected {tok}")))
        }
    }

    pub fn expect_word(&mut self, word: &str) -> Result<(), SyntaxError> {
        if self.at_word(word) {
            self.next();
            Ok(())
        } else {
            Err(self.unexpected(&format!("expected {word}")))
        }
    }

    pub fn unexpected(&self, context: &str) -> SyntaxError {
        let t = self.peek();
        SyntaxError::at(t, format!("{context}, found {}", t.tok))
    }

    pub fn fresh_blank(&mut self) -> Node {
        self.anon += 1;
        // '#' cannot appear in a Turtle label, so this never collides with a parsed one
        Node::Blank(BlankId::new(format!("anon#{}", self.anon)))
    }

    /// Consumes a prefix or base directive if one starts here.
    pub fn directive(&mut self) -> Result<bool, SyntaxError> {
        let turtle_style = match &self.peek().tok {
            Tok::AtPrefix | Tok::AtBase => true,
            Tok::Word(w) if w.eq_ignore_ascii_case("prefix") || w.eq_ignore_ascii_case("base") => {
                false
            }
            _ => return Ok(false),
        };
        let head = self.next();
        let is_prefix = match &head.tok {
            Tok::AtPrefix => true,
            Tok::Word(w) => w.eq_ignore_ascii_case("prefix"),
            _ => false,
        };
        if is_prefix {
            let name = match self.next() {
                Token {
                    tok: Tok::PName { prefix, local },
                    ..
                } if local.is_empty() => prefix,
                other => return Err(SyntaxError::at(&other, "expected a prefix name like 'ex:'")),
            };
            let iri_tok = self.next();
            let Tok::IriRef(raw) = &iri_tok.tok else {
                return Err(SyntaxError::at(&iri_tok, "expected an IRI"));
            };
            let ns = self.resolve(raw, &iri_tok)?;
            self.prefixes.insert(name, ns);
        } else {
            let iri_tok = self.next();
            let Tok::IriRef(raw) = &iri_tok.tok else {
                return Err(SyntaxError::at(&iri_tok, "expected an IRI"));
            };
            self.base = Some(self.resolve(raw, &iri_tok)?);
        }
        if turtle_style {
            self.expect(&Tok::Dot)?;
        }
        Ok(true)
    }

    fn resolve(&self, raw: &str, at: &Token) -> Result<String, SyntaxError> {
        if has_scheme(raw) {
            return Ok(raw.to_owned());
        }
        match &self.base {
            Some(base) => Ok(resolve_iri(base, raw)),
            None => Err(SyntaxError::at(
                at,
                format!("relative IRI <{raw}> without a base"),
            )),
        }
    }

    /// Consumes an IRI reference, prefixed name or `a`.
    pub fn iri(&mut self) -> Result<Option<Iri>, SyntaxError> {
        let t = self.peek().clone();
        let iri = match &t.tok {
            Tok::IriRef(raw) => self.resolve(raw, &t)?,
            Tok::PName { prefix, local } => match self.prefixes.get(prefix) {
                Some(ns) => format!("{ns}{local}"),
                None => return Err(SyntaxError::at(&t, format!("undefined prefix '{prefix}:'"))),
            },
            _ => return Ok(None),
        };
        self.next();
        Ok(Some(Iri::new(iri)))
    }

    pub fn predicate(&mut self) -> Result<Iri, SyntaxError> {
        if matches!(&self.peek().tok, Tok::Word(w) if w == "a") {
            self.next();
            return Ok(Iri::new(vocab::rdf::TYPE));
        }
        if let Tok::Var(name) = &self.peek().tok {
            let iri = Iri::new(format!("{VAR_MARKER}{name}"));
            self.next();
            return Ok(iri);
        }
        self.iri()?
            .ok_or_else(|| self.unexpected("expected a predicate"))
    }

    /// Consumes a literal if one starts here.
    pub fn literal(&mut self) -> Result<Option<Literal>, SyntaxError> {
        let t = self.peek().clone();
        let lit = match &t.tok {
            Tok::Str(s) => {
                self.next();
                match &self.peek().tok {
                    Tok::LangTag(lang) => {
                        let lang = lang.clone();
                        self.next();
                        Literal::lang(s, lang)
                    }
                    Tok::DoubleCaret => {
                        self.next();
                        let dt = self
                            .iri()?
                            .ok_or_else(|| self.unexpected("expected a datatype IRI"))?;
                        Literal::typed(s, dt)
                    }
                    _ => Literal::plain(s),
                }
            }
            Tok::Integer(n) => {
                self.next();
                Literal::typed(n, Iri::new(vocab::xsd::INTEGER))
            }
            Tok::Decimal(n) => {
                self.next();
                Literal::typed(n, Iri::new(vocab::xsd::DECIMAL))
            }
            Tok::Double(n) => {
                self.next();
                Literal::typed(n, Iri::new(vocab::xsd::DOUBLE))
            }
            Tok::Word(w) if w == "true" || w == "false" => {
                let w = w.clone();
                self.next();
                Literal::typed(w, Iri::new(vocab::xsd::BOOLEAN))
            }
            _ => return Ok(None),
        };
        Ok(Some(lit))
    }

    fn statement(&mut self, graph: &mut Graph) -> Result<(), SyntaxError> {
        if self.directive()? {
            return Ok(());
        }
        self.triples_block(graph)?;
        self.expect(&Tok::Dot)?;
        Ok(())
    }

    /// Parses `subject predicateObjectList` (or a bare `[ ... ]`) into `graph`.
    pub fn triples_block(&mut self, graph: &mut Graph) -> Result<(), SyntaxError> {
        if self.at(&Tok::LBracket) {
            let subject = self.fresh_blank();
            self.next();
            if !self.at(&Tok::RBracket) {
                self.predicate_object_list(graph, &subject)?;
            }
            self.expect(&Tok::RBracket)?;
            if !self.at(&Tok::Dot) && !self.at(&Tok::RBrace) && !self.at(&Tok::Eof) {
                self.predicate_object_list(graph, &subject)?;
            }
            return Ok(());
        }
        let subject = self.subject(graph)?;
        self.predicate_object_list(graph, &subject)
    }

    fn subject(&mut self, graph: &mut Graph) -> Result<Node, SyntaxError> {
        if let Some(iri) = self.iri()? {
            return Ok(Node::Iri(iri));
        }
        let t = self.peek().clone();
        match &t.tok {
            Tok::BlankLabel(label) => {
                self.next();
                Ok(Node::blank(label))
            }
            Tok::LParen => self.collection(graph),
            Tok::Var(name) => {
                let node = var_node(name);
                self.next();
                Ok(node)
            }
            _ => Err(self.unexpected("expected a subject")),
        }
    }

    fn predicate_object_list(
        &mut self,
        graph: &mut Graph,
        subject: &Node,
    ) -> Result<(), SyntaxError> {
        loop {
            let predicate = self.predicate()?;
            loop {
                self.object(graph, subject, &predicate)?;
                if self.at(&Tok::Comma) {
                    self.next();
                } else {
                    break;
                }
            }
            if !self.at(&Tok::Semicolon) {
                return Ok(());
            }
            while self.at(&Tok::Semicolon) {
                self.next();
            }
            if matches!(
                self.peek().tok,
                Tok::Dot | Tok::RBracket | Tok::RBrace | Tok::Eof
            ) {
                return Ok(());
            }
        }
    }

    fn emit(&self, graph: &mut Graph, s: &Node, p: &Iri, o: Node) -> Result<(), SyntaxError> {
        let triple = Triple::new(s.clone(), p.clone(), o)
            .map_err(|e| SyntaxError::at(self.peek(), e.to_string()))?;
        graph.insert(triple);
        Ok(())
    }

    fn object(
        &mut self,
        graph: &mut Graph,
        subject: &Node,
        predicate: &Iri,
    ) -> Result<(), SyntaxError> {
        if let Some(iri) = self.iri()? {
            return self.emit(graph, subject, predicate, Node::Iri(iri));
        }
        if let Some(lit) = self.literal()? {
            return self.emit(graph, subject, predicate, Node::Literal(lit));
        }
        let t = self.peek().clone();
        match &t.tok {
            Tok::BlankLabel(label) => {
                self.next();
                self.emit(graph, subject, predicate, Node::blank(label))
            }
            Tok::LBracket => {
                self.next();
                let node = self.fresh_blank();
                self.emit(graph, subject, predicate, node.clone())?;
                if !self.at(&Tok::RBracket) {
                    self.predicate_object_list(graph, &node)?;
                }
                self.expect(&Tok::RBracket)?;
                Ok(())
            }
            Tok::LParen => {
                // reserve the outer triple's position before the list cells
                let head = if self.peek_at(1).tok == Tok::RParen {
                    self.next();
                    self.next();
                    return self.emit(graph, subject, predicate, Node::iri(vocab::rdf::NIL));
                } else {
                    self.fresh_blank()
                };
                self.emit(graph, subject, predicate, head.clone())?;
                self.collection_from(graph, head)?;
                Ok(())
            }
            Tok::Var(name) => {
                let node = var_node(name);
                self.next();
                self.emit(graph, subject, predicate, node)
            }
            _ => Err(self.unexpected("expected an object")),
        }
    }

    fn collection(&mut self, graph: &mut Graph) -> Result<Node, SyntaxError> {
        if self.peek_at(1).tok == Tok::RParen {
            self.next();
            self.next();
            return Ok(Node::iri(vocab::rdf::NIL));
        }
        let head = self.fresh_blank();
        self.collection_from(graph, head.clone())?;
        Ok(head)
    }

    fn collection_from(&mut self, graph: &mut Graph, head: Node) -> Result<(), SyntaxError> {
        self.expect(&Tok::LParen)?;
        let first = Iri::new(vocab::rdf::FIRST);
        let rest = Iri::new(vocab::rdf::REST);
        let mut cell = head;
        loop {
            self.object(graph, &cell, &first)?;
            if self.at(&Tok::RParen) {
                self.next();
                return self.emit(graph, &cell, &rest, Node::iri(vocab::rdf::NIL));
            }
            let next = self.fresh_blank();
            self.emit(graph, &cell, &rest, next.clone())?;
            cell = next;
        }
    }
}

/// Variables travel through the triple builder as IRIs with this prefix. A
/// parsed IRI can never start with a space, so the two cannot be confused.
pub(crate) const VAR_MARKER: &str = " ?";

fn var_node(name: &str) -> Node {
    Node::iri(format!("{VAR_MARKER}{name}"))
}

fn has_scheme(iri: &str) -> bool {
    let mut chars = iri.chars();
    if !chars.next().is_some_and(|c| c.is_ascii_alphabetic()) {
        return false;
    }
    for c in chars {
        if c == ':' {
            return true;
        }
        if !(c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.')) {
            return false;
        }
    }
    false
}

/// Reference resolution for the common cases: fragment, absolute path,
/// network path and relative path with dot segments.
pub(crate) fn resolve_iri(base: &str, reference: &str) -> String {
    if reference.is_empty() {
        return base.split('#').next().unwrap_or(base).to_owned();
    }
    if let Some(fragment) = reference.strip_prefix('#') {
        let stem = base.split('#').next().unwrap_or(base);
        return format!("{stem}#{fragment}");
    }
    let scheme_end = base.find(':').map_or(0, |i| i + 1);
    let scheme = &base[..scheme_end];
    if reference.starts_with("//") {
        return format!("{scheme}{reference}");
    }
    let after_scheme = &base[scheme_end..];
    let (authority, path) = if let Some(rest) = after_scheme.strip_prefix("//") {
        let end = rest.find(['/', '?', '#']).unwrap_or(rest.len());
        (format!("//{}", &rest[..end]), &rest[end..])
    } else {
        (String::new(), after_scheme)
    };
    let path = path.split(['?', '#']).next().unwrap_or("");
    let merged = if reference.starts_with('/') {
        reference.to_owned()
    } else if let Some(query) = reference.strip_prefix('?') {
        return format!("{scheme}{authority}{path}?{query}");
    } else {
        let dir = match path.rfind('/') {
            Some(i) => &path[..=i],
            None if !authority.is_empty() => "/",
            None => "",
        };
        format!("{dir}{reference}")
    };
    format!("{scheme}{authority}{}", remove_dot_segments(&merged))
}

fn remove_dot_segments(path: &str) -> String {
    let (path, suffix) = match path.find(['?', '#']) {
        Some(i) => (&path[..i], &path[i..]),
        None => (path, ""),
    };
    let mut out: Vec<&str> = Vec::new();
    let segments: Vec<&str> = path.split('/').collect();
    let last = segments.len().saturating_sub(1);
    for (i, seg) in segments.iter().enumerate() {
        match *seg {
            "." => {
                if i == last {
                    out.push("");
                }
            }
            ".." => {
                if out.len() > 1 {
                    out.pop();
                }
                if i == last {
                    out.push("");
                }
            }
            s => out.push(s),
        }
    }
    format!("{}{suffix}", out.join("/"))
}
