/**
 * Query canvas state - the model behind the visual query composer.
 *
 * The canvas holds indicator chips, optional country/org filter chips, the
 * mode toggle, radius control, and threshold slider. It mirrors QueryGraph
 * field-for-field so that canvas state and DSL text are a bijection through
 * printQuery/parse; every op keeps the state canonical (radius is 1 unless
 * the mode is neighborhood, matching what the DSL can express).
 */

import {
  DEFAULT_THRESHOLD, DEFAULT_WEIGHT, parse, printQuery,
  type Mode, type QueryError, type QueryGraph,
} from './dsl.js';

export interface IndicatorChip {
  category: string;
  weight: number;
}

export interface QueryCanvasState {
  name: string;
  indicators: IndicatorChip[];
  country: string | null;
  org: string | null;
  threshold: number;
  mode: Mode;
  radius: number;
}

export function emptyCanvas(name = 'untitled'): QueryCanvasState {
  return {
    name,
    indicators: [],
    country: null,
    org: null,
    threshold: DEFAULT_THRESHOLD,
    mode: 'individual',
    radius: 1,
  };
}

// -- ops (all pure; each returns a new state) --------------------------------

export function addIndicator(state: QueryCanvasState, category: string,
                             weight: number = DEFAULT_WEIGHT): QueryCanvasState {
  return { ...state, indicators: [...state.indicators, { category, weight }] };
}

export function removeIndicator(state: QueryCanvasState, index: number): QueryCanvasState {
  return { ...state, indicators: state.indicators.filter((_, i) => i !== index) };
}

export function setWeight(state: QueryCanvasState, index: number, weight: number): QueryCanvasState {
  return {
    ...state,
    indicators: state.indicators.map((chip, i) => (i === index ? { ...chip, weight } : chip)),
  };
}

export function setCountry(state: QueryCanvasState, country: string | null): QueryCanvasState {
  return { ...state, country };
}

export function setOrg(state: QueryCanvasState, org: string | null): QueryCanvasState {
  return { ...state, org };
}

export function setThreshold(state: QueryCanvasState, threshold: number): QueryCanvasState {
  return { ...state, threshold };
}

export function setMode(state: QueryCanvasState, mode: Mode): QueryCanvasState {
  // Individual mode cannot carry a radius in the DSL; reset it so the
  // canvas <-> DSL round trip stays an identity.
  return { ...state, mode, radius: mode === 'neighborhood' ? state.radius : 1 };
}

export function setRadius(state: QueryCanvasState, radius: number): QueryCanvasState {
  if (state.mode !== 'neighborhood') return state;
  return { ...state, radius };
}

export function setName(state: QueryCanvasState, name: string): QueryCanvasState {
  return { ...state, name };
}

// -- serialization ------------------------------------------------------------

export function canvasToQuery(state: QueryCanvasState): QueryGraph {
  return {
    name: state.name,
    requirements: state.indicators.map((chip) => ({ ...chip })),
    countryFilter: state.country,
    orgFilter: state.org,
    threshold: state.threshold,
    mode: state.mode,
    radius: state.radius,
  };
}

export function queryToCanvas(q: QueryGraph): QueryCanvasState {
  return {
    name: q.name,
    indicators: q.requirements.map((req) => ({ ...req })),
    country: q.countryFilter,
    org: q.orgFilter,
    threshold: q.threshold,
    mode: q.mode,
    radius: q.radius,
  };
}

export function canvasToDsl(state: QueryCanvasState): string {
  return printQuery(canvasToQuery(state));
}

export function dslToCanvas(text: string, defaultThreshold?: number): QueryCanvasState {
  return queryToCanvas(parse(text, defaultThreshold));
}

// -- validation ----------------------------------------------------------------

export type ProblemTarget =
  | { kind: 'chip'; index: number }
  | { kind: 'name' }
  | { kind: 'country' }
  | { kind: 'org' }
  | { kind: 'threshold' }
  | { kind: 'mode' };

export interface CanvasProblem {
  target: ProblemTarget;
  message: string;
}

/**
 * Pre-flight checks matching what the parser enforces, attributed to the
 * control that caused them. A clean canvas always serializes to DSL the
 * parser accepts.
 */
export function validateCanvas(state: QueryCanvasState): CanvasProblem[] {
  const problems: CanvasProblem[] = [];
  state.indicators.forEach((chip, index) => {
    if (chip.category.trim() === '') {
      problems.push({ target: { kind: 'chip', index }, message: 'category must not be empty' });
    }
    if (!Number.isFinite(chip.weight) || chip.weight <= 0) {
      problems.push({ target: { kind: 'chip', index }, message: `weight must be positive, got ${chip.weight}` });
    }
  });
  if (!(state.threshold >= 0 && state.threshold <= 1)) {
    problems.push({ target: { kind: 'threshold' }, message: `threshold must be in [0,1], got ${state.threshold}` });
  }
  if (!Number.isInteger(state.radius) || state.radius < 1) {
    problems.push({ target: { kind: 'mode' }, message: `radius must be a positive integer, got ${state.radius}` });
  }
  return problems;
}

/** The run button is enabled only for a canvas with at least one chip and no problems. */
export function canRun(state: QueryCanvasState): boolean {
  return state.indicators.length > 0 && validateCanvas(state).length === 0;
}

/**
 * Map a 1-based DSL line number back to the canvas control that produced it.
 *
 * printQuery emits one line per construct in a fixed order, so parser and
 * service errors (which carry line/column) can be surfaced inline at the
 * offending chip instead of as a wall of text.
 */
export function targetForLine(state: QueryCanvasState, line: number): ProblemTarget | null {
  let cursor = 1; // line 1: query "name" {
  if (line === cursor) return { kind: 'name' };
  for (let i = 0; i < state.indicators.length; i += 1) {
    cursor += 1;
    if (line === cursor) return { kind: 'chip', index: i };
  }
  if (state.country !== null) {
    cursor += 1;
    if (line === cursor) return { kind: 'country' };
  }
  if (state.org !== null) {
    cursor += 1;
    if (line === cursor) return { kind: 'org' };
  }
  cursor += 1;
  if (line === cursor) return { kind: 'threshold' };
  cursor += 1;
  if (line === cursor) return { kind: 'mode' };
  return null;
}

/** Convenience wrapper for surfacing a QueryError at its canvas control. */
export function targetForError(state: QueryCanvasState, err: QueryError): ProblemTarget | null {
  return targetForLine(state, err.line);
}
