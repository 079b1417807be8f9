// Deterministic stub scoring. These formulas must match the pipeline's
// builtin scorer bit for bit: same ASCII tokenizer, same arithmetic, so a
// run scored over the wire is byte-identical to a builtin-scored run.

const TOKEN = /[a-z0-9]+/g;

export function tokenize(text: string): string[] {
  return text.toLowerCase().match(TOKEN) ?? [];
}

export function overlapScore(query: string, doc: string): number {
  const queryTerms = new Set(tokenize(query));
  if (queryTerms.size === 0) {
    return 0.0;
  }
  const docTerms = new Set(tokenize(doc));
  let shared = 0;
  for (const term of queryTerms) {
    if (docTerms.has(term)) {
      shared += 1;
    }
  }
  return shared / queryTerms.size;
}

export function duoPreference(query: string, docA: string, docB: string): number {
  const delta = overlapScore(query, docA) - overlapScore(query, docB);
  return Math.min(1.0, Math.max(0.0, 0.5 + delta / 2.0));
}

export interface Scorer {
  monoScore(query: string, doc: string): number;
  duoScore(query: string, docA: string, docB: string): number;
}

export const stubScorer: Scorer = {
  monoScore: overlapScore,
  duoScore: duoPreference,
};

// Plugin seam: a CommonJS module exporting monoScore / duoScore with the
// Scorer signatures replaces the stub (this is where a real re-ranker
// plugs in). Resolution or shape problems fail startup, not requests.
export function loadPlugin(modulePath: string): Scorer {
  /* eslint-disable-next-line @typescript-eslint/no-var-requires */
  const loaded = require(require("path").resolve(modulePath));
  if (typeof loaded.monoScore !== "function" ||
      typeof loaded.duoScore !== "function") {
    throw new Error(
      `plugin ${modulePath} must export monoScore(query, doc) and ` +
      `duoScore(query, docA, docB)`);
  }
  return { monoScore: loaded.monoScore, duoScore: loaded.duoScore };
}
