/**
 * Annotation session state: one distance slot per message, each either
 * unset or pointing at the message itself or one of the previous W
 * messages.  Illegal selections are rejected without mutating anything,
 * so a session can never produce an invalid distance vector; saving is
 * only possible once every slot is set.
 */

export class AnnotationSession {
  private readonly distances: (number | null)[]
  private unsaved = false

  constructor(
    readonly chatId: string,
    readonly annotatorId: string,
    readonly nMessages: number,
    readonly window: number,
    initial?: readonly number[],
  ) {
    if (nMessages < 1) throw new Error('chat has no messages')
    if (window < 1) throw new Error('window must be >= 1')
    this.distances = new Array<number | null>(nMessages).fill(null)
    if (initial !== undefined) {
      if (initial.length !== nMessages) {
        throw new Error(
          `initial vector covers ${initial.length} messages, expected ${nMessages}`,
        )
      }
      initial.forEach((distance, index) => {
        if (!this.isLegalDistance(index, distance)) {
          throw new Error(
            `initial distance ${distance} illegal for message ${index}`,
          )
        }
        this.distances[index] = distance
      })
    }
  }

  /** Largest backward distance message `index` may link to. */
  maxDistance(index: number): number {
    return Math.min(this.window, index)
  }

  isLegalDistance(index: number, distance: number): boolean {
    return (
      Number.isInteger(index) &&
      index >= 0 &&
      index < this.nMessages &&
      Number.isInteger(distance) &&
      distance >= 0 &&
      distance <= this.maxDistance(index)
    )
  }

  /** Candidate message indices for `index`, most recent first. */
  candidates(index: number): number[] {
    const out: number[] = []
    for (let m = 0; m <= this.maxDistance(index); m++) out.push(index - m)
    return out
  }

  /**
   * Link message `index` to `candidateIndex` (equal indices self-link).
   * Returns false and leaves the session untouched when the candidate is
   * outside the legal window.
   */
  selectLink(index: number, candidateIndex: number): boolean {
    return this.setDistance(index, index - candidateIndex)
  }

  /** Keyboard path: assign the backward distance directly. */
  setDistance(index: number, distance: number): boolean {
    if (!this.isLegalDistance(index, distance)) return false
    if (this.distances[index] !== distance) {
      this.distances[index] = distance
      this.unsaved = true
    }
    return true
  }

  distanceOf(index: number): number | null {
    return this.distances[index] ?? null
  }

  get slots(): readonly (number | null)[] {
    return [...this.distances]
  }

  get complete(): boolean {
    return this.distances.every((d) => d !== null)
  }

  /** True when there are selections the server has not seen. */
  get dirty(): boolean {
    return this.unsaved
  }

  /** Whole-vector body for the PUT; only available once complete. */
  toPutBody(): { distances: number[] } {
    if (!this.complete) throw new Error('session has unset slots')
    return { distances: this.distances.map((d) => d as number) }
  }

  markSaved(): void {
    this.unsaved = false
  }
}
