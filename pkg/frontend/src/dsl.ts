/**
 * Query DSL - client-side parser and printer.
 *
 * Mirrors the service's query language exactly so the workbench can
 * serialize canvas state, validate it before POSTing, and map error
 * positions back onto the canvas:
 *
 *     query "travel ring" {
 *       indicator "C2" weight 2.0
 *       indicator "C5"
 *       in "Atlantis"
 *       with "Crimson Hand"
 *       threshold 0.7
 *       mode neighborhood radius 2
 *     }
 *
 * Defaults: weight 1.0, threshold 0.7, mode individual, radius 1.
 * `parse` and `printQuery` are exact inverses on valid queries.
 */

export const KEYWORDS = new Set([
  'query', 'indicator', 'weight', 'in', 'with', 'threshold', 'mode',
  'individual', 'neighborhood', 'radius',
]);

export const DEFAULT_WEIGHT = 1.0;
export const DEFAULT_THRESHOLD = 0.7;

export type Mode = 'individual' | 'neighborhood';

export interface IndicatorRequirement {
  category: string;
  weight: number;
}

export interface QueryGraph {
  name: string;
  requirements: IndicatorRequirement[];
  countryFilter: string | null;
  orgFilter: string | null;
  threshold: number;
  mode: Mode;
  radius: number;
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/** Base for every tokenizer/parser failure; positions are 1-based. */
export class QueryError extends Error {
  readonly code: string = 'QueryError';
  readonly line: number;
  readonly column: number;
  readonly detail: string;
  readonly expected: string[];
  /** 0-based char offset into the input, <= input length. */
  readonly offset: number;

  constructor(line: number, column: number, detail: string,
              expected: string[] = [], offset = 0) {
    super(`${line}:${column}: ${detail}`);
    this.line = line;
    this.column = column;
    this.detail = detail;
    this.expected = expected;
    this.offset = offset;
  }
}

export class UnterminatedStringError extends QueryError {
  override readonly code = 'UnterminatedString';
}

export class IllegalCharacterError extends QueryError {
  override readonly code = 'IllegalCharacter';
}

export class ParseError extends QueryError {
  override readonly code: string = 'ParseError';
}

export class DuplicateClauseError extends ParseError {
  override readonly code = 'DuplicateClause';
}

export class ThresholdOutOfRangeError extends ParseError {
  override readonly code = 'ThresholdOutOfRange';
}

// ---------------------------------------------------------------------------
// Tokenizer
// ---------------------------------------------------------------------------

export type TokenType =
  | 'keyword'
  | 'identifier'
  | 'string'
  | 'number'
  | '{'
  | '}'
  | 'end of input';

export interface Token {
  type: TokenType;
  value: string | number;
  raw: string;
  line: number;
  column: number;
  offset: number;
}

// ASCII only: number literals never contain other digit scripts.
const isDigit = (ch: string): boolean => ch >= '0' && ch <= '9';
const isIdentStart = (ch: string): boolean => /[\p{L}_]/u.test(ch);
const isIdentChar = (ch: string): boolean => /[\p{L}\p{N}_]/u.test(ch);

const show = (raw: string): string =>
  raw === '' ? "'end of input'" : `'${raw.replace(/\\/g, '\\\\').replace(/'/g, "\\'")}'`;

/**
 * Lex the DSL. Comments run from '#' to end of line.
 *
 * Strings are double-quoted with escapes \" and \\ only; any other
 * character, including newlines, stands for itself. Throws
 * UnterminatedStringError or IllegalCharacterError with position.
 */
export function tokenize(text: string): Token[] {
  const tokens: Token[] = [];
  let i = 0;
  let line = 1;
  let col = 1;
  const n = text.length;

  const advance = (ch: string): void => {
    i += 1;
    if (ch === '\n') {
      line += 1;
      col = 1;
    } else {
      col += 1;
    }
  };

  while (i < n) {
    const ch = text[i]!;
    if (ch === ' ' || ch === '\t' || ch === '\r' || ch === '\n') {
      advance(ch);
      continue;
    }
    if (ch === '#') {
      while (i < n && text[i] !== '\n') advance(text[i]!);
      continue;
    }
    const startLine = line;
    const startCol = col;
    const startOff = i;
    if (ch === '{' || ch === '}') {
      tokens.push({ type: ch, value: ch, raw: ch, line, column: col, offset: i });
      advance(ch);
      continue;
    }
    if (ch === '"') {
      advance(ch);
      const parts: string[] = [];
      for (;;) {
        if (i >= n) {
          throw new UnterminatedStringError(
            startLine, startCol, 'unterminated string literal', [], startOff);
        }
        const cur = text[i]!;
        if (cur === '"') {
          advance(cur);
          break;
        }
        if (cur === '\\') {
          if (i + 1 >= n) {
            throw new UnterminatedStringError(
              startLine, startCol, 'unterminated string literal', [], startOff);
          }
          const esc = text[i + 1]!;
          if (esc !== '"' && esc !== '\\') {
            throw new IllegalCharacterError(
              line, col + 1, `unsupported escape \\${esc}`, [], i + 1);
          }
          advance(cur);
          parts.push(esc);
          advance(esc);
          continue;
        }
        parts.push(cur);
        advance(cur);
      }
      tokens.push({
        type: 'string', value: parts.join(''), raw: text.slice(startOff, i),
        line: startLine, column: startCol, offset: startOff,
      });
      continue;
    }
    if (isDigit(ch)) {
      let j = i;
      while (j < n && isDigit(text[j]!)) j += 1;
      if (j < n && text[j] === '.' && j + 1 < n && isDigit(text[j + 1]!)) {
        j += 1;
        while (j < n && isDigit(text[j]!)) j += 1;
      }
      if (j < n && (text[j] === 'e' || text[j] === 'E')) {
        let k = j + 1;
        if (k < n && (text[k] === '+' || text[k] === '-')) k += 1;
        if (k < n && isDigit(text[k]!)) {
          j = k;
          while (j < n && isDigit(text[j]!)) j += 1;
        }
      }
      const raw = text.slice(i, j);
      while (i < j) advance(text[i]!);
      const value = Number(raw);
      if (!Number.isFinite(value)) {
        throw new IllegalCharacterError(
          startLine, startCol, `number literal out of range: ${raw}`, [], startOff);
      }
      tokens.push({ type: 'number', value, raw, line: startLine, column: startCol, offset: startOff });
      continue;
    }
    if (isIdentStart(ch)) {
      let j = i;
      while (j < n && isIdentChar(text[j]!)) j += 1;
      const raw = text.slice(i, j);
      while (i < j) advance(text[i]!);
      tokens.push({
        type: KEYWORDS.has(raw) ? 'keyword' : 'identifier',
        value: raw, raw, line: startLine, column: startCol, offset: startOff,
      });
      continue;
    }
    throw new IllegalCharacterError(line, col, `illegal character ${show(ch)}`, [], i);
  }

  tokens.push({ type: 'end of input', value: '', raw: '', line, column: col, offset: n });
  return tokens;
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

class Parser {
  private pos = 0;

  constructor(private readonly tokens: Token[]) {}

  private peek(): Token {
    return this.tokens[this.pos]!;
  }

  private take(): Token {
    const tok = this.tokens[this.pos]!;
    if (tok.type !== 'end of input') this.pos += 1;
    return tok;
  }

  private fail(tok: Token, detail: string, expected: string[]): ParseError {
    return new ParseError(tok.line, tok.column, detail, expected, tok.offset);
  }

  private expectKeyword(word: string): Token {
    const tok = this.take();
    if (tok.type !== 'keyword' || tok.value !== word) {
      throw this.fail(tok, `expected '${word}', found ${show(tok.raw)}`, [`keyword '${word}'`]);
    }
    return tok;
  }

  private expect(ttype: TokenType): Token {
    const tok = this.take();
    if (tok.type !== ttype) {
      throw this.fail(tok, `expected ${ttype}, found ${show(tok.raw)}`, [ttype]);
    }
    return tok;
  }

  parseQuery(defaultThreshold: number = DEFAULT_THRESHOLD): QueryGraph {
    this.expectKeyword('query');
    const name = this.expect('string');
    this.expect('{');

    const requirements: IndicatorRequirement[] = [];
    let country: string | null = null;
    let org: string | null = null;
    let threshold: number | null = null;
    let mode: Mode | null = null;
    let radius = 1;

    for (;;) {
      const tok = this.peek();
      if (tok.type === '}') {
        this.take();
        break;
      }
      if (tok.type === 'end of input') {
        throw this.fail(tok, "unterminated query body, expected '}'", ['clause', "'}'"]);
      }
      if (tok.type !== 'keyword') {
        throw this.fail(tok, `expected a clause keyword, found ${show(tok.raw)}`,
                        ['indicator', 'in', 'with', 'threshold', 'mode']);
      }

      if (tok.value === 'indicator') {
        this.take();
        const cat = this.expect('string');
        let weight = DEFAULT_WEIGHT;
        if (this.peek().type === 'keyword' && this.peek().value === 'weight') {
          this.take();
          const num = this.expect('number');
          weight = num.value as number;
          if (weight <= 0) {
            throw this.fail(num, `weight must be positive, got ${num.raw}`, ['positive number']);
          }
        }
        requirements.push({ category: cat.value as string, weight });
      } else if (tok.value === 'in') {
        if (country !== null) {
          throw new DuplicateClauseError(tok.line, tok.column, "duplicate 'in' clause", [], tok.offset);
        }
        this.take();
        country = this.expect('string').value as string;
      } else if (tok.value === 'with') {
        if (org !== null) {
          throw new DuplicateClauseError(tok.line, tok.column, "duplicate 'with' clause", [], tok.offset);
        }
        this.take();
        org = this.expect('string').value as string;
      } else if (tok.value === 'threshold') {
        if (threshold !== null) {
          throw new DuplicateClauseError(tok.line, tok.column, "duplicate 'threshold' clause", [], tok.offset);
        }
        this.take();
        const num = this.expect('number');
        const value = num.value as number;
        if (!(value >= 0 && value <= 1)) {
          throw new ThresholdOutOfRangeError(
            num.line, num.column, `threshold must be in [0,1], got ${num.raw}`, [], num.offset);
        }
        threshold = value;
      } else if (tok.value === 'mode') {
        if (mode !== null) {
          throw new DuplicateClauseError(tok.line, tok.column, "duplicate 'mode' clause", [], tok.offset);
        }
        this.take();
        const mtok = this.take();
        if (mtok.type === 'keyword' && mtok.value === 'individual') {
          mode = 'individual';
        } else if (mtok.type === 'keyword' && mtok.value === 'neighborhood') {
          mode = 'neighborhood';
          if (this.peek().type === 'keyword' && this.peek().value === 'radius') {
            this.take();
            const num = this.expect('number');
            if (num.raw.includes('.') || num.raw.includes('e') || num.raw.includes('E')) {
              throw this.fail(num, `radius must be an integer, got ${num.raw}`, ['integer']);
            }
            radius = parseInt(num.raw, 10);
            if (radius < 1) {
              throw this.fail(num, `radius must be >= 1, got ${num.raw}`, ['positive integer']);
            }
          }
        } else {
          throw this.fail(mtok,
                          `expected 'individual' or 'neighborhood', found ${show(mtok.raw)}`,
                          ['individual', 'neighborhood']);
        }
      } else {
        throw this.fail(tok, `unexpected keyword ${show(tok.raw)} in query body`,
                        ['indicator', 'in', 'with', 'threshold', 'mode']);
      }
    }

    const tail = this.peek();
    if (tail.type !== 'end of input') {
      throw this.fail(tail, `trailing input after query: ${show(tail.raw)}`, ['end of input']);
    }
    if (requirements.length === 0) {
      throw this.fail(tail, 'query requires at least one indicator clause', ['indicator clause']);
    }

    return {
      name: name.value as string,
      requirements,
      countryFilter: country,
      orgFilter: org,
      threshold: threshold === null ? defaultThreshold : threshold,
      mode: mode ?? 'individual',
      radius,
    };
  }
}

/**
 * Parse DSL text into a QueryGraph. Throws QueryError subclasses.
 *
 * defaultThreshold applies when the query has no threshold clause.
 */
export function parse(text: string, defaultThreshold: number = DEFAULT_THRESHOLD): QueryGraph {
  return new Parser(tokenize(text)).parseQuery(defaultThreshold);
}

// ---------------------------------------------------------------------------
// Printer
// ---------------------------------------------------------------------------

const quote = (value: string): string =>
  '"' + value.replace(/\\/g, '\\\\').replace(/"/g, '\\"') + '"';

// Integral floats keep a trailing ".0" so the printed form is unambiguously
// a number literal and matches the service's canonical output.
const num = (value: number): string =>
  Number.isInteger(value) && Number.isFinite(value) && Math.abs(value) < 1e21
    ? `${value}.0`
    : String(value);

/** Canonical DSL text; parse(printQuery(q)) deep-equals q. */
export function printQuery(q: QueryGraph): string {
  const lines = [`query ${quote(q.name)} {`];
  for (const req of q.requirements) {
    lines.push(`  indicator ${quote(req.category)} weight ${num(req.weight)}`);
  }
  if (q.countryFilter !== null) lines.push(`  in ${quote(q.countryFilter)}`);
  if (q.orgFilter !== null) lines.push(`  with ${quote(q.orgFilter)}`);
  lines.push(`  threshold ${num(q.threshold)}`);
  lines.push(q.mode === 'neighborhood' ? `  mode neighborhood radius ${q.radius}` : '  mode individual');
  lines.push('}');
  return lines.join('\n') + '\n';
}
