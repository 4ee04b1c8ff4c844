/**
 * Review overlay: compares model predictions against the annotators'
 * majority label per message and formats the chance-corrected agreement
 * reported by the service.
 */

import type { AgreementResponse, ChatDetail } from './types.js'

export interface ReviewRow {
  index: number
  prediction: number | null
  majority: number | null
  /** null when either side is missing */
  agrees: boolean | null
  /** share of annotators on the modal label */
  agreement: number | null
}

/** Plurality label; ties resolve toward the smallest distance. */
export function majorityLabel(labels: Record<string, number>): number | null {
  const counts = new Map<number, number>()
  for (const value of Object.values(labels)) {
    counts.set(value, (counts.get(value) ?? 0) + 1)
  }
  let best: number | null = null
  let bestCount = 0
  for (const [value, count] of counts) {
    if (count > bestCount || (count === bestCount && best !== null && value < best)) {
      best = value
      bestCount = count
    }
  }
  return best
}

export function buildReview(
  chat: ChatDetail,
  agreement: AgreementResponse,
): ReviewRow[] {
  const byIndex = new Map(agreement.per_message.map((m) => [m.index, m]))
  return chat.messages.map((message) => {
    const entry = byIndex.get(message.index)
    const labels = entry?.labels ?? {}
    const majority = Object.keys(labels).length ? majorityLabel(labels) : null
    const prediction = chat.predictions?.[message.index] ?? null
    return {
      index: message.index,
      prediction,
      majority,
      agrees:
        prediction === null || majority === null ? null : prediction === majority,
      agreement: entry?.agreement ?? null,
    }
  })
}

/** Four-decimal rendering of the service's kappa, or a placeholder. */
export function formatKappa(kappa: number | null): string {
  return kappa === null ? 'n/a' : kappa.toFixed(4)
}
