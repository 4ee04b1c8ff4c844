/** Thin typed client for the annotation service; no state of its own. */

import type {
  AgreementResponse,
  AnnotationRecord,
  ChatDetail,
  ChatList,
} from './types.js'

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`)
  }
}

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText
    try {
      const body = (await response.json()) as { detail?: string }
      if (body.detail) detail = body.detail
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, detail)
  }
  return (await response.json()) as T
}

export class ApiClient {
  constructor(private readonly baseUrl: string = '') {}

  listChats(): Promise<ChatList> {
    return fetch(`${this.baseUrl}/api/chats`).then((r) => asJson<ChatList>(r))
  }

  getChat(chatId: string): Promise<ChatDetail> {
    return fetch(`${this.baseUrl}/api/chats/${encodeURIComponent(chatId)}`).then(
      (r) => asJson<ChatDetail>(r),
    )
  }

  putAnnotation(
    chatId: string,
    annotatorId: string,
    distances: number[],
  ): Promise<AnnotationRecord> {
    const url =
      `${this.baseUrl}/api/annotations/${encodeURIComponent(chatId)}` +
      `/${encodeURIComponent(annotatorId)}`
    return fetch(url, {
      method: 'PUT',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ distances }),
    }).then((r) => asJson<AnnotationRecord>(r))
  }

  getAgreement(chatId: string): Promise<AgreementResponse> {
    return fetch(
      `${this.baseUrl}/api/agreement/${encodeURIComponent(chatId)}`,
    ).then((r) => asJson<AgreementResponse>(r))
  }
}
