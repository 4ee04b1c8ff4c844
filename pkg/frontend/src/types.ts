/** Payload shapes of the annotation service's JSON API. */

export interface ChatSummary {
  chat_id: string
  n_messages: number
  annotators: string[]
}

export interface ChatList {
  window: number
  chats: ChatSummary[]
}

export interface ChatMessage {
  index: number
  speaker: 'C' | 'A'
  text: string
  tokens: string[]
}

export interface ChatDetail {
  chat_id: string
  window: number
  messages: ChatMessage[]
  annotations: Record<string, number[]>
  predictions: number[] | null
}

export interface AnnotationRecord {
  chat_id: string
  annotator_id: string
  distances: number[]
}

export interface MessageAgreement {
  index: number
  labels: Record<string, number>
  agreement: number | null
}

export interface AgreementResponse {
  chat_id: string
  kappa: number | null
  per_message: MessageAgreement[]
}
