// Wire types for the review-service JSON API.

export type SessionKind = 'taxonomy' | 'equivalence';

export interface SessionCreated {
  session: string;
  items: number;
}

/** Card served to the taxonomy triage queue. */
export interface TriageCard {
  item: string;
  task_id: string;
  model_name: string;
  column: string;
  diagnosis: string;
  suggested_category: string | null;
  verified: boolean;
  best_match_rate: number;
  evidence: {
    samples?: Array<{ row: number; gt: string; pred: string; after_chain?: string }>;
    stats?: Record<string, number>;
  };
  categories: string[];
  remaining: number;
}

/** Blinded card served to an equivalence-annotation queue: values and the
 * column description only, never strata or script verdicts. */
export interface AnnotationCard {
  item: string;
  gt_values: string[];
  pred_values: string[];
  description: string;
  labels: string[];
  remaining: number;
}

export interface QueueDone {
  done: true;
  export?: string;
}

export type QueueResponse<Card> = Card | QueueDone;

export function isDone<Card>(response: QueueResponse<Card>): response is QueueDone {
  return (response as QueueDone).done === true;
}

export interface AgreementStats {
  kappa: number | null;
  percent_agreement: number | null;
  items_complete: number;
  raters: string[];
}

export interface LabelMatrix {
  items: string[];
  raters: string[];
  labels: string[][];
}

export interface ClassifyResult {
  recorded: boolean;
  ledger_size: number;
}

export const EQUIVALENCE_LABELS = ['equivalent', 'not_equivalent'] as const;
export type EquivalenceLabel = (typeof EQUIVALENCE_LABELS)[number];

/** The 14 taxonomy leaves, grouped by attribution for the picker. */
export const TAXONOMY_GROUPS: ReadonlyArray<{ group: string; leaves: string[] }> = [
  {
    group: 'Agent',
    leaves: [
      'agent/flawed_sql_logic',
      'agent/join_type_error',
      'agent/wrong_data_source',
      'agent/domain_knowledge_gap',
      'agent/null_handling_error',
      'agent/key_generation_error',
    ],
  },
  {
    group: 'Benchmark',
    leaves: [
      'benchmark/ambiguous_description',
      'benchmark/gt_calculation_error',
      'benchmark/eval_false_positive/actual_match',
      'benchmark/eval_false_positive/format_mismatch',
      'benchmark/eval_false_positive/duplicated_gt_rows',
      'benchmark/eval_false_positive/null_representation',
      'benchmark/eval_false_positive/row_ordering',
      'benchmark/eval_false_positive/other',
    ],
  },
];

export const ALL_LEAVES: string[] = TAXONOMY_GROUPS.flatMap((g) => g.leaves);
