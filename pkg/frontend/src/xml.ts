/**
 * Minimal XML reader for the server's fixed vocabulary.
 *
 * The browser has DOMParser, but keeping this dependency-free lets the
 * response-model code run unchanged under Node for unit tests. Only the
 * subset the wire format uses is supported: elements, attributes,
 * character data and the five predefined entities. No namespaces,
 * CDATA or DTDs.
 */

export interface XmlElement {
  tag: string;
  attrs: Record<string, string>;
  children: XmlElement[];
  text: string;
}

const ENTITIES: Record<string, string> = {
  amp: "&",
  lt: "<",
  gt: ">",
  quot: '"',
  apos: "'",
};

function decodeEntities(raw: string): string {
  return raw.replace(/&(#x?[0-9a-fA-F]+|\w+);/g, (whole, body: string) => {
    if (body.startsWith("#x") || body.startsWith("#X")) {
      return String.fromCodePoint(parseInt(body.slice(2), 16));
    }
    if (body.startsWith("#")) {
      return String.fromCodePoint(parseInt(body.slice(1), 10));
    }
    const known = ENTITIES[body];
    if (known === undefined) throw new Error(`unknown entity &${body};`);
    return known;
  });
}

class Reader {
  pos = 0;
  constructor(readonly source: string) {}

  error(message: string): never {
    throw new Error(`XML error at offset ${this.pos}: ${message}`);
  }

  skipMisc(): void {
    for (;;) {
      const rest = this.source.slice(this.pos);
      if (/^\s/.test(rest)) {
        this.pos += 1;
      } else if (rest.startsWith("<?")) {
        const end = this.source.indexOf("?>", this.pos);
        if (end < 0) this.error("unterminated processing instruction");
        this.pos = end + 2;
      } else if (rest.startsWith("<!--")) {
        const end = this.source.indexOf("-->", this.pos);
        if (end < 0) this.error("unterminated comment");
        this.pos = end + 3;
      } else {
        return;
      }
    }
  }

  readName(): string {
    const match = /^[A-Za-z_][\w.-]*/.exec(this.source.slice(this.pos));
    if (!match) this.error("expected a name");
    this.pos += match[0].length;
    return match[0];
  }

  readElement(): XmlElement {
    if (this.source[this.pos] !== "<") this.error("expected '<'");
    this.pos += 1;
    const tag = this.readName();
    const attrs: Record<string, string> = {};
    for (;;) {
      while (/\s/.test(this.source[this.pos] ?? "")) this.pos += 1;
      const here = this.source[this.pos];
      if (here === "/") {
        if (this.source[this.pos + 1] !== ">") this.error("expected '/>'");
        this.pos += 2;
        return { tag, attrs, children: [], text: "" };
      }
      if (here === ">") {
        this.pos += 1;
        break;
      }
      const name = this.readName();
      if (this.source[this.pos] !== "=") this.error("expected '=' after attribute name");
      this.pos += 1;
      const quote = this.source[this.pos];
      if (quote !== '"' && quote !== "'") this.error("expected a quoted attribute value");
      const end = this.source.indexOf(quote, this.pos + 1);
      if (end < 0) this.error("unterminated attribute value");
      attrs[name] = decodeEntities(this.source.slice(this.pos + 1, end));
      this.pos = end + 1;
    }

    const children: XmlElement[] = [];
    let text = "";
    for (;;) {
      const open = this.source.indexOf("<", this.pos);
      if (open < 0) this.error(`missing closing tag for <${tag}>`);
      text += decodeEntities(this.source.slice(this.pos, open));
      this.pos = open;
      if (this.source.startsWith("<!--", this.pos)) {
        this.skipMisc();
        continue;
      }
      if (this.source.startsWith("</", this.pos)) {
        this.pos += 2;
        const closing = this.readName();
        if (closing !== tag) this.error(`mismatched </${closing}>, expected </${tag}>`);
        while (/\s/.test(this.source[this.pos] ?? "")) this.pos += 1;
        if (this.source[this.pos] !== ">") this.error("expected '>'");
        this.pos += 1;
        return { tag, attrs, children, text };
      }
      children.push(this.readElement());
    }
  }
}

export function parseXml(source: string): XmlElement {
  const reader = new Reader(source);
  reader.skipMisc();
  const root = reader.readElement();
  reader.skipMisc();
  if (reader.pos !== source.length) reader.error("trailing content after document element");
  return root;
}

export function childrenNamed(el: XmlElement, tag: string): XmlElement[] {
  return el.children.filter((c) => c.tag === tag);
}

export function firstChild(el: XmlElement, tag: string): XmlElement | undefined {
  return el.children.find((c) => c.tag === tag);
}
