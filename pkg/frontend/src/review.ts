/**
 * Label review - human validation of classifier output.
 *
 * The reviewer sees each sentence with its predicted labels and
 * probabilities, toggles labels on or off, and submits corrections as
 * feedback. A sentence carries at most MAX_LABELS labels - the service
 * rejects more with a 422 - so the fourth toggle is blocked here, before
 * any request is made.
 */

import type { ApiClient, ClassifyResponse, LabelScore } from './api.js';

export const MAX_LABELS = 3;
export const DECISION_THRESHOLD = 0.5;

export interface SentenceReview {
  text: string;
  labels: LabelScore[];   // every category with its probability, model order
  predicted: string[];    // categories at or above the decision threshold
  selected: string[];     // reviewer's current choice, sorted
}

export interface ReviewState {
  sentences: SentenceReview[];
  submissions: number;           // confirmed submissions this session
  corpusSize: number | null;     // size reported by the last submission
}

/** Categories the model predicts: probability >= 0.5, capped at MAX_LABELS by confidence. */
export function predictedLabels(labels: LabelScore[]): string[] {
  const above = labels.filter((l) => l.probability >= DECISION_THRESHOLD);
  above.sort((a, b) => b.probability - a.probability);
  return above.slice(0, MAX_LABELS).map((l) => l.category).sort();
}

/** Build review state from a classify response; an empty document reviews nothing. */
export function startReview(response: ClassifyResponse): ReviewState {
  return {
    sentences: response.sentences.map((s) => {
      const predicted = predictedLabels(s.labels);
      return { text: s.text, labels: s.labels, predicted, selected: [...predicted] };
    }),
    submissions: 0,
    corpusSize: null,
  };
}

export interface ToggleResult {
  state: ReviewState;
  blocked: boolean; // true when the toggle would exceed MAX_LABELS
}

/** Toggle a label on one sentence; adding a fourth label is refused. */
export function toggleLabel(state: ReviewState, sentenceIndex: number, category: string): ToggleResult {
  const sentence = state.sentences[sentenceIndex];
  if (sentence === undefined) return { state, blocked: false };
  const has = sentence.selected.includes(category);
  if (!has && sentence.selected.length >= MAX_LABELS) {
    return { state, blocked: true };
  }
  const selected = has
    ? sentence.selected.filter((c) => c !== category)
    : [...sentence.selected, category].sort();
  const sentences = state.sentences.map((s, i) =>
    i === sentenceIndex ? { ...s, selected } : s);
  return { state: { ...state, sentences }, blocked: false };
}

/** Submit one sentence's corrections; resolves to the updated review state. */
export async function submitSentence(
  api: ApiClient, state: ReviewState, sentenceIndex: number, note = '',
): Promise<ReviewState> {
  const sentence = state.sentences[sentenceIndex];
  if (sentence === undefined) throw new Error(`no sentence at index ${sentenceIndex}`);
  const response = await api.sendFeedback({
    text: sentence.text,
    predicted: sentence.predicted,
    corrected: sentence.selected,
    note,
  });
  return {
    ...state,
    submissions: state.submissions + 1,
    corpusSize: response.appended_corpus_size,
  };
}
